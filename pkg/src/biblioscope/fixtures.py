"""Deterministic toy inputs for the full pipeline at 1/1000 of the real scale.

The source counts are fixed by construction so that the coverage report has
known values:

* 1495 source-A records hit the infectious-disease query;
* 1247 of them are found in source B (by pmid, doi or title + year) and 278
  of those carry an infectious-disease or tropical-medicine category;
* 179 further source-B records carry those categories but are not hits.

Author keywords come from seven themes, one of them the 2020 Covid vocabulary.
Run ``python -m biblioscope.fixtures DIR`` to regenerate the files.
"""
from __future__ import annotations

import argparse
import random
from pathlib import Path

import yaml

from .indicators import ReferenceBase
from .records import BibRecord, DocType, MeshHeading, write_records

N_HITS = 1495
N_MATCHED = 1247
N_MATCHED_IN_CATEGORIES = 278
N_B_ONLY = 179
N_MATCHED_BY_DOI = 250
N_MATCHED_BY_TITLE = 97

THESAURUS = [
    ("Infections", "C01"),
    ("Bacterial Infections", "C01.150"),
    ("Tuberculosis", "C01.150.252"),
    ("Tuberculosis, Pulmonary", "C01.150.252.410"),
    ("Virus Diseases", "C01.925"),
    ("HIV Infections", "C01.925.782"),
    ("Coronavirus Infections", "C01.925.256"),
    ("COVID-19", "C01.925.256.466"),
    ("Parasitic Diseases", "C01.610"),
    ("Malaria", "C01.610.752"),
    ("Malaria, Falciparum", "C01.610.752.300"),
    ("Respiratory Tract Infections", "C08.730"),
    ("Respiratory Tract Infections", "C01.748"),
    ("Pneumonia", "C08.730.610"),
    ("Vaccines", "D20.215"),
    ("Bacterial Vaccines", "D20.215.894.135"),
    ("BCG Vaccine", "D20.215.894.135.500"),
    ("Fungal Vaccines", "D20.215.894.500"),
    ("Protozoan Vaccines", "D20.215.894.675"),
    ("Malaria Vaccines", "D20.215.894.675.500"),
    ("Toxoids", "D20.215.894.850"),
    ("Viral Vaccines", "D20.215.894.899"),
    ("COVID-19 Vaccines", "D20.215.894.899.520"),
    ("Disease Notification", "N06.850.520.308.970.200"),
    ("Disease Eradication", "N06.850.780.200"),
    ("Disease Transmission, Infectious", "G03.200"),
    ("Infectious Disease Transmission, Vertical", "G03.200.450"),
    ("Contact Tracing", "N06.850.780.200.450"),
    ("Carrier State", "C01.158"),
    ("Chain of Infection", "G03.191"),
    ("Disease Outbreaks", "G03.850.290"),
    ("Epidemics", "G03.850.290.250"),
    ("Pandemics", "G03.850.290.250.500"),
    ("Travel-Related Illness", "C23.550.888"),
    ("Jet Lag Syndrome", "C23.550.888.500"),
    ("Quarantine", "N06.850.780.680"),
    ("Reinfection", "C01.100"),
    ("Neoplasms", "C04"),
    ("Breast Neoplasms", "C04.588.180"),
    ("Cardiovascular Diseases", "C14"),
    ("Hypertension", "C14.907.489"),
]

HIT_DESCRIPTORS = [
    "Tuberculosis, Pulmonary", "HIV Infections", "Malaria, Falciparum", "COVID-19",
    "BCG Vaccine", "Malaria Vaccines", "COVID-19 Vaccines", "Toxoids", "Contact Tracing",
    "Disease Outbreaks", "Pandemics", "Carrier State", "Reinfection", "Quarantine",
    "Infectious Disease Transmission, Vertical", "Travel-Related Illness", "Pneumonia",
]
# Pneumonia alone is not a hit: it explodes only from the C08 branch
MISS_DESCRIPTORS = ["Breast Neoplasms", "Hypertension", "Jet Lag Syndrome"]

ID_CATEGORIES = ["INFECTIOUS DISEASES", "TROPICAL MEDICINE"]
OTHER_CATEGORIES = ["MICROBIOLOGY", "IMMUNOLOGY", "PUBLIC, ENVIRONMENTAL & OCCUPATIONAL HEALTH",
                    "VIROLOGY", "PARASITOLOGY", "PHARMACOLOGY & PHARMACY"]

COUNTRIES = ["US", "GB", "FR", "CN", "BR", "IN", "ZA", "DE", "KE", "TH"]
COUNTRY_WEIGHTS = [30, 12, 10, 12, 6, 6, 5, 8, 3, 3]
# all-domain output relative to infectious-disease output, per country
REFERENCE_FACTOR = {"US": 14, "GB": 11, "FR": 12, "CN": 16, "BR": 9, "IN": 10, "ZA": 4,
                    "DE": 15, "KE": 3, "TH": 6}

THEMES = {
    "tuberculosis": ["tuberculosis", "Mycobacterium tuberculosis", "latent tuberculosis",
                     "BCG", "isoniazid", "multidrug resistance", "interferon-gamma release assay",
                     "rifampicin"],
    "hiv": ["HIV", "antiretroviral therapy", "AIDS", "viral load", "PrEP", "CD4",
            "mother-to-child transmission", "HIV testing"],
    "malaria": ["malaria", "Plasmodium falciparum", "artemisinin", "Anopheles", "bed nets",
                "malaria vaccine", "parasitemia", "drug resistance"],
    "antibiotics": ["antibiotic resistance", "Staphylococcus aureus", "MRSA", "carbapenemase",
                    "Escherichia coli", "antimicrobial stewardship", "beta-lactamase",
                    "Klebsiella pneumoniae"],
    "vaccination": ["vaccination", "vaccines", "immunogenicity", "vaccine hesitancy",
                    "influenza", "measles", "herd immunity", "seroprevalence"],
    "epidemiology": ["epidemiology", "surveillance", "outbreak", "mathematical modelling",
                     "transmission", "risk factors", "incidence", "mortality"],
    "covid": ["COVID", "SARS-CoV-2", "coronavirus disease 2019", "Wuhan coronavirus",
              "coronavirus pandemic", "lockdown", "social distancing", "2019 nCoV"],
}
PLURAL_VARIANTS = {"vaccines": "vaccine", "risk factors": "risk factor", "outbreak": "outbreaks"}
JUNK_KEYWORDS = ["***", "--", "#"]

YEARS = (2000, 2020)
HORIZON = 2020
CONFIG = {
    "inputs": {
        "source_a": "source_a.jsonl",
        "source_b": "source_b.jsonl",
        "thesaurus": "thesaurus.tsv",
        "reference": "reference.tsv",
        "pattern_map": None,
    },
    "query": None,
    "categories": ID_CATEGORIES,
    "filters": {"doc_types": ["Article", "ProceedingsPaper", "Review", "Letter"]},
    "map": {"min_occ": 5, "resolution": 1.0, "max_iter": 1000, "tol": 1e-9,
            "years": [2000, 2020], "countries": ["FR", "US"]},
    "indicators": {"window": 2, "horizon": HORIZON,
                   "periods": ["2000", "2005-2009", "2010-2014", "2015-2019", "2020"],
                   "countries": ["WORLD", "US", "GB", "FR", "CN", "BR", "ZA"]},
    "covid": {"years": [2019, 2020], "periods": ["2020"]},
    "seed": 0,
}


def _countries(rng: random.Random) -> list[str]:
    first = rng.choices(COUNTRIES, COUNTRY_WEIGHTS)[0]
    if rng.random() < 0.2:
        second = rng.choices(COUNTRIES, COUNTRY_WEIGHTS)[0]
        return sorted({first, second})
    return [first]


def _keywords(rng: random.Random, year: int) -> list[str]:
    names = list(THEMES)
    theme = "covid" if year == 2020 and rng.random() < 0.5 else rng.choice(names[:-1])
    words = rng.sample(THEMES[theme], rng.randint(2, 4))
    if rng.random() < 0.05:
        words.append(rng.choice(THEMES[rng.choice(names[:-1])]))
    out = []
    for w in words:
        if w in PLURAL_VARIANTS and rng.random() < 0.3:
            w = PLURAL_VARIANTS[w]
        if rng.random() < 0.15:
            w = w.upper() if rng.random() < 0.5 else w.title()
        out.append(w)
    return out


def _citations(rng: random.Random, year: int) -> list[int]:
    n = rng.randint(0, 12)
    return sorted(rng.randint(year, min(year + 4, HORIZON + 1)) for _ in range(n))


def generate(seed: int = 20210401) -> tuple[list[BibRecord], list[BibRecord], ReferenceBase]:
    rng = random.Random(seed)
    a_records: list[BibRecord] = []
    b_records: list[BibRecord] = []
    serial = iter(range(1, 10 ** 6))

    def a_hit(i: int) -> BibRecord:
        year = rng.randint(*YEARS)
        mesh = [MeshHeading(d, rng.random() < 0.4) for d in rng.sample(HIT_DESCRIPTORS[:-1], 2)]
        if rng.random() < 0.3:
            mesh.append(MeshHeading(rng.choice(MISS_DESCRIPTORS), False))
        return BibRecord(title=f"Study {i} of infection dynamics", year=year,
                         pmid=str(10_000_000 + i), doi=f"10.1000/a.{i}",
                         mesh_terms=tuple(mesh))

    hits = [a_hit(i) for i in range(N_HITS)]
    # non-hits: wrong subject, or right subject but outside the date range
    misses = []
    for i in range(N_HITS, N_HITS + 400):
        if i % 4 == 0:
            year = rng.choice([1998, 1999, 2021])
            mesh = (MeshHeading("HIV Infections", True),)
        else:
            year = rng.randint(*YEARS)
            mesh = tuple(MeshHeading(d, False) for d in
                         rng.sample(MISS_DESCRIPTORS + ["Pneumonia"], 2))
        misses.append(BibRecord(title=f"Study {i} outside the domain", year=year,
                                pmid=str(10_000_000 + i), mesh_terms=mesh))
    a_records = hits + misses
    rng.shuffle(a_records)

    def b_from(hit: BibRecord | None, tier: str, cats: list[str]) -> BibRecord:
        n = next(serial)
        year = hit.year if hit else rng.randint(*YEARS)
        title = hit.title if hit else f"Category paper {n}"
        if tier == "title":
            title = title.upper() + "."
        doc_type = DocType.ARTICLE
        roll = rng.random()
        if roll < 0.02:
            doc_type = DocType.OTHER
        elif roll < 0.15:
            doc_type = rng.choice([DocType.REVIEW, DocType.LETTER, DocType.PROCEEDINGS_PAPER])
        kws = _keywords(rng, year) if rng.random() < 0.85 else []
        if kws and rng.random() < 0.005:
            kws = rng.sample(JUNK_KEYWORDS, 2)
        return BibRecord(
            title=title, year=year, wos_id=f"WOS{n:06d}",
            pmid=hit.pmid if (hit and tier == "pmid") else None,
            doi=hit.doi if (hit and tier == "doi") else (f"10.2000/b.{n}" if not hit else None),
            doc_type=doc_type,
            countries=frozenset(_countries(rng)) if rng.random() > 0.01 else frozenset(),
            categories=frozenset(cats), author_keywords=tuple(kws),
            citations=tuple(_citations(rng, year)), retracted=rng.random() < 0.01)

    n_pmid = N_MATCHED - N_MATCHED_BY_DOI - N_MATCHED_BY_TITLE
    tiers = ["pmid"] * n_pmid + ["doi"] * N_MATCHED_BY_DOI + ["title"] * N_MATCHED_BY_TITLE
    rng.shuffle(tiers)
    in_cats = set(rng.sample(range(N_MATCHED), N_MATCHED_IN_CATEGORIES))
    for k, (hit, tier) in enumerate(zip(hits[:N_MATCHED], tiers)):
        if k in in_cats:
            cats = rng.sample(ID_CATEGORIES, rng.randint(1, 2))
            if rng.random() < 0.3:
                cats.append(rng.choice(OTHER_CATEGORIES))
        else:
            cats = rng.sample(OTHER_CATEGORIES, rng.randint(1, 2))
        b_records.append(b_from(hit, tier, cats))
    for _ in range(N_B_ONLY):
        b_records.append(b_from(None, "none", rng.sample(ID_CATEGORIES, rng.randint(1, 2))))
    for _ in range(600):
        b_records.append(b_from(None, "none", rng.sample(OTHER_CATEGORIES, 1)))
    rng.shuffle(b_records)

    domain = ReferenceBase.from_records(b_records)
    totals = {}
    for (country, year), n in domain.totals.items():
        if country != "WORLD":
            totals[(country, year)] = n * REFERENCE_FACTOR[country] + rng.randint(0, 20)
    for year in range(YEARS[0], YEARS[1] + 1):
        totals[("WORLD", year)] = sum(v for (c, y), v in totals.items() if y == year) + 500
    return a_records, b_records, ReferenceBase(dict(sorted(totals.items())))


MALFORMED_LINES = ['{"pmid": "1", "title": "no year"}', "not json at all"]


def write_fixture(directory: str | Path, seed: int = 20210401) -> Path:
    """Write the fixture files and a ``config.yaml`` into ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    a, b, reference = generate(seed)
    write_records(a, directory / "source_a.jsonl")
    with open(directory / "source_a.jsonl", "a", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(MALFORMED_LINES) + "\n")
    write_records(b, directory / "source_b.jsonl")
    reference.to_tsv(directory / "reference.tsv")
    with open(directory / "thesaurus.tsv", "w", encoding="utf-8", newline="\n") as fh:
        fh.writelines(f"{name}\t{tn}\n" for name, tn in THESAURUS)
    with open(directory / "config.yaml", "w", encoding="utf-8", newline="\n") as fh:
        yaml.safe_dump(CONFIG, fh, sort_keys=False, allow_unicode=True)
    return directory / "config.yaml"


def shipped_config() -> Path:
    """Path of the bundled fixture configuration."""
    return Path(__file__).parent / "data" / "fixture" / "config.yaml"


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("directory")
    parser.add_argument("--seed", type=int, default=20210401)
    args = parser.parse_args(argv)
    print(write_fixture(args.directory, args.seed))


if __name__ == "__main__":
    main()
