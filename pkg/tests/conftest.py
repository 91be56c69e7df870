"""Shared fixtures: small taxonomies, rectangle geographies, corpus builders."""

from __future__ import annotations

import json
from datetime import datetime
from pathlib import Path

import pytest

from tastemap.ingest import Corpus, load_geo_index
from tastemap.model import CheckIn, Taxonomy, load_taxonomy, reference_taxonomy_path

TOY_TAXONOMY = """\
Drink\tPub
Drink\tWine Bar
Drink\tTea Room
FastFood\tBakery
FastFood\tBurger Joint
SlowFood\tSteakhouse
SlowFood\tSushi Restaurant
"""


def write_taxonomy(path: Path, text: str = TOY_TAXONOMY) -> Path:
    path.write_text(text, encoding="utf-8")
    return path


def write_geo(path: Path, boxes: dict[str, tuple[float, float, float, float]]) -> Path:
    """One rectangular ring per country: {code: (min_lon, min_lat, max_lon, max_lat)}."""
    lines = []
    for code, (lo_x, lo_y, hi_x, hi_y) in boxes.items():
        ring = ";".join(
            f"{x:g},{y:g}"
            for x, y in ((lo_x, lo_y), (hi_x, lo_y), (hi_x, hi_y), (lo_x, hi_y), (lo_x, lo_y))
        )
        lines.append(f"{code}\t{ring}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def make_checkin(
    user="u1",
    venue="v1",
    lat=1.0,
    lon=1.0,
    ts="2024-04-16T12:00:00",
    subcat="Pub",
) -> CheckIn:
    return CheckIn(user, venue, lat, lon, datetime.fromisoformat(ts), subcat)


def corpus_of(taxonomy: Taxonomy, checkins) -> Corpus:
    return Corpus(checkins, taxonomy)


def write_jsonl(path: Path, records) -> Path:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, separators=(",", ":")) + "\n")
    return path


def jsonl_record(user="u1", venue="v1", lat=1.0, lon=1.0, ts="2024-04-16T12:00:00", subcat="Pub"):
    return {"user": user, "venue": venue, "lat": lat, "lon": lon, "ts": ts, "subcat": subcat}


@pytest.fixture(scope="session")
def ref_tax() -> Taxonomy:
    return load_taxonomy(reference_taxonomy_path())


@pytest.fixture(scope="session")
def toy_tax(tmp_path_factory) -> Taxonomy:
    path = tmp_path_factory.mktemp("tax") / "toy.txt"
    return load_taxonomy(write_taxonomy(path))


@pytest.fixture(scope="session")
def two_country_geo(tmp_path_factory):
    path = tmp_path_factory.mktemp("geo") / "geo.txt"
    return load_geo_index(
        write_geo(path, {"AA": (0, 0, 10, 10), "BB": (20, 0, 30, 10)})
    )
