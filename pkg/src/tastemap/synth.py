"""Synthetic check-in corpora with planted cultural structure.

The generator exists to plant verifiable structure (per-country preference
and temporal distributions), not to imitate real mobility.  Every user draws
from an independent Philox counter stream keyed by (seed, user index), so
output is byte-identical for a given spec and seed no matter how generation
is scheduled.

Spec files are JSON::

    {"countries": [
        {"code": "AA",
         "bbox": [0.0, 0.0, 10.0, 10.0],
         "users": 50,
         "checkins_per_user": [10, 20],
         "preferences": {"Pub": 5.0, "Bakery": 1.0},
         "weekend_fraction": 0.285,
         "hourly": {"*": {"weekday": [..24 weights..], "weekend": [...]}},
         "cities": [{"id": "AA-1", "bbox": [0.0, 0.0, 5.0, 5.0]}],
         "venues_per_subcategory": 3},
        ...]}

``checkins_per_user`` is either a fixed integer or an inclusive [low, high]
range.  ``hourly`` keys are class ids or "*" for all classes; omitted
profiles are uniform.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import DataError
from .model import Taxonomy

REFERENCE_WEEK = ("2024-04-15", "2024-04-16", "2024-04-17", "2024-04-18",
                  "2024-04-19", "2024-04-20", "2024-04-21")
WEEKDAY_DATES = REFERENCE_WEEK[:5]
WEEKEND_DATES = REFERENCE_WEEK[5:]


@dataclass(frozen=True)
class CitySpec:
    city_id: str
    bbox: tuple[float, float, float, float]


@dataclass(frozen=True)
class CountrySpec:
    code: str
    bbox: tuple[float, float, float, float]
    users: int
    checkins_low: int
    checkins_high: int
    preferences: Mapping[str, float]
    weekend_fraction: float = 2.0 / 7.0
    hourly: Mapping[str, Mapping[str, tuple[float, ...]]] = field(default_factory=dict)
    cities: tuple[CitySpec, ...] = ()
    venues_per_subcategory: int = 3


@dataclass(frozen=True)
class SynthSpec:
    countries: tuple[CountrySpec, ...]

    def __post_init__(self):
        codes = [c.code for c in self.countries]
        if not codes:
            raise DataError("spec defines no countries")
        if len(set(codes)) != len(codes):
            raise DataError("country codes must be unique")
        for c in self.countries:
            if c.users < 1:
                raise DataError(f"country {c.code!r} needs at least one user")
            if not 1 <= c.checkins_low <= c.checkins_high:
                raise DataError(f"country {c.code!r} has a bad check-in range")
            weights = list(c.preferences.values())
            if not weights or min(weights) < 0 or max(weights) <= 0:
                raise DataError(
                    f"country {c.code!r} needs nonnegative weights with at least one positive"
                )
            min_lon, min_lat, max_lon, max_lat = c.bbox
            if not (min_lon < max_lon and min_lat < max_lat):
                raise DataError(f"country {c.code!r} has a degenerate bounding box")
            if not 0.0 <= c.weekend_fraction <= 1.0:
                raise DataError(f"country {c.code!r} weekend_fraction out of [0, 1]")
            if c.venues_per_subcategory < 1:
                raise DataError(f"country {c.code!r} needs at least one venue per subcategory")
            city_ids = [city.city_id for city in c.cities]
            if len(set(city_ids)) != len(city_ids):
                raise DataError(f"country {c.code!r} has duplicate city ids")
            for city in c.cities:
                lo_x, lo_y, hi_x, hi_y = city.bbox
                if not (lo_x < hi_x and lo_y < hi_y):
                    raise DataError(f"city {city.city_id!r} has a degenerate bounding box")

    @staticmethod
    def from_dict(doc: Mapping) -> "SynthSpec":
        countries = []
        for entry in doc.get("countries", []):
            per_user = entry.get("checkins_per_user", 10)
            if isinstance(per_user, (list, tuple)):
                low, high = int(per_user[0]), int(per_user[1])
            else:
                low = high = int(per_user)
            hourly = {
                key: {grp: tuple(float(w) for w in ws) for grp, ws in profiles.items()}
                for key, profiles in entry.get("hourly", {}).items()
            }
            cities = tuple(
                CitySpec(city_id=str(c["id"]), bbox=tuple(float(v) for v in c["bbox"]))
                for c in entry.get("cities", [])
            )
            countries.append(
                CountrySpec(
                    code=str(entry["code"]),
                    bbox=tuple(float(v) for v in entry["bbox"]),
                    users=int(entry["users"]),
                    checkins_low=low,
                    checkins_high=high,
                    preferences={str(k): float(v) for k, v in entry["preferences"].items()},
                    weekend_fraction=float(entry.get("weekend_fraction", 2.0 / 7.0)),
                    hourly=hourly,
                    cities=cities,
                    venues_per_subcategory=int(entry.get("venues_per_subcategory", 3)),
                )
            )
        return SynthSpec(countries=tuple(countries))

    @staticmethod
    def from_file(path: str | Path) -> "SynthSpec":
        with open(path, encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise DataError(f"bad spec file: {exc}") from exc
        return SynthSpec.from_dict(doc)


@dataclass(frozen=True)
class GeneratedCorpus:
    corpus_path: Path
    labels_path: Path
    geo_path: Path
    cities_path: Path | None


def _hour_weights(spec: CountrySpec, class_id: str, day_group: str) -> np.ndarray:
    profile = spec.hourly.get(class_id) or spec.hourly.get("*")
    if profile and day_group in profile:
        w = np.asarray(profile[day_group], np.float64)
        if w.shape != (24,) or w.min() < 0 or w.sum() <= 0:
            raise DataError(f"country {spec.code!r}: bad hourly profile")
        return w / w.sum()
    return np.full(24, 1.0 / 24.0)


def _user_stream(seed: int, user_index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed).jumped(user_index))


def generate_corpus(
    spec: SynthSpec, seed: int, out_dir: str | Path, taxonomy: Taxonomy
) -> GeneratedCorpus:
    """Write a planted-structure corpus plus ground truth into ``out_dir``.

    Emits corpus.jsonl, labels.csv (user,country,city), geo.txt (one
    rectangular ring per country) and cities.csv when any country has
    cities.  Identical (spec, seed) inputs produce byte-identical files.
    """
    if seed < 0:
        raise DataError("seed must be nonnegative")
    for country in spec.countries:
        for name in country.preferences:
            if name not in taxonomy:
                raise DataError(f"country {country.code!r}: unknown subcategory {name!r}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    corpus_path = out_dir / "corpus.jsonl"
    labels_path = out_dir / "labels.csv"
    geo_path = out_dir / "geo.txt"
    any_cities = any(c.cities for c in spec.countries)
    cities_path = out_dir / "cities.csv" if any_cities else None

    user_index = 0
    with open(corpus_path, "w", encoding="utf-8") as corpus_fh, open(
        labels_path, "w", encoding="utf-8"
    ) as labels_fh:
        labels_fh.write("user,country,city\n")
        for country in spec.countries:
            names = sorted(country.preferences)
            weights = np.asarray([country.preferences[n] for n in names], np.float64)
            probs = weights / weights.sum()
            subcat_classes = [taxonomy.class_of(n) for n in names]
            hour_probs = {
                (cls, grp): _hour_weights(country, cls, grp)
                for cls in set(subcat_classes)
                for grp in ("weekday", "weekend")
            }
            for local_idx in range(country.users):
                user_id = f"u{user_index:06d}"
                rng = _user_stream(seed, user_index)
                user_index += 1
                if country.cities:
                    city = country.cities[local_idx % len(country.cities)]
                    box = city.bbox
                    city_id = city.city_id
                else:
                    box = country.bbox
                    city_id = ""
                labels_fh.write(f"{user_id},{country.code},{city_id}\n")
                n_checkins = int(
                    rng.integers(country.checkins_low, country.checkins_high + 1)
                )
                for _ in range(n_checkins):
                    choice = int(rng.choice(len(names), p=probs))
                    subcat = names[choice]
                    class_id = subcat_classes[choice]
                    weekend = bool(rng.random() < country.weekend_fraction)
                    dates = WEEKEND_DATES if weekend else WEEKDAY_DATES
                    date = dates[int(rng.integers(len(dates)))]
                    group = "weekend" if weekend else "weekday"
                    hour = int(rng.choice(24, p=hour_probs[(class_id, group)]))
                    minute = int(rng.integers(60))
                    second = int(rng.integers(60))
                    lon = float(rng.uniform(box[0], box[2]))
                    lat = float(rng.uniform(box[1], box[3]))
                    venue = (
                        f"v-{country.code}-{taxonomy.index_of(subcat)}-"
                        f"{int(rng.integers(country.venues_per_subcategory))}"
                    )
                    record = {
                        "user": user_id,
                        "venue": venue,
                        "lat": lat,
                        "lon": lon,
                        "ts": f"{date}T{hour:02d}:{minute:02d}:{second:02d}",
                        "subcat": subcat,
                    }
                    corpus_fh.write(json.dumps(record, separators=(",", ":")) + "\n")

    with open(geo_path, "w", encoding="utf-8") as fh:
        for country in spec.countries:
            min_lon, min_lat, max_lon, max_lat = country.bbox
            ring = ";".join(
                f"{x:g},{y:g}"
                for x, y in (
                    (min_lon, min_lat),
                    (max_lon, min_lat),
                    (max_lon, max_lat),
                    (min_lon, max_lat),
                    (min_lon, min_lat),
                )
            )
            fh.write(f"{country.code}\t{ring}\n")

    if cities_path is not None:
        with open(cities_path, "w", encoding="utf-8") as fh:
            fh.write("city,country,min_lon,min_lat,max_lon,max_lat\n")
            for country in spec.countries:
                for city in country.cities:
                    b = city.bbox
                    fh.write(f"{city.city_id},{country.code},{b[0]:g},{b[1]:g},{b[2]:g},{b[3]:g}\n")

    return GeneratedCorpus(corpus_path, labels_path, geo_path, cities_path)


def adjusted_rand_index(labels_a, labels_b) -> float:
    """Chance-corrected agreement between two labelings of one item set.

    Accepts mappings (item -> label) or two aligned sequences.  Invariant to
    relabeling of cluster ids.
    """
    if isinstance(labels_a, Mapping) or isinstance(labels_b, Mapping):
        if not (isinstance(labels_a, Mapping) and isinstance(labels_b, Mapping)):
            raise DataError("pass two mappings or two sequences, not a mix")
        if set(labels_a) != set(labels_b):
            raise DataError("labelings cover different item sets")
        items = sorted(labels_a)
        a = [labels_a[i] for i in items]
        b = [labels_b[i] for i in items]
    else:
        a = list(labels_a)
        b = list(labels_b)
        if len(a) != len(b):
            raise DataError("labelings cover different item counts")
    n = len(a)
    if n == 0:
        raise DataError("cannot score empty labelings")

    levels_a = {v: i for i, v in enumerate(dict.fromkeys(a))}
    levels_b = {v: i for i, v in enumerate(dict.fromkeys(b))}
    table = np.zeros((len(levels_a), len(levels_b)), np.int64)
    for va, vb in zip(a, b):
        table[levels_a[va], levels_b[vb]] += 1

    def comb2(x):
        return x * (x - 1) / 2.0

    sum_ij = comb2(table).sum()
    sum_a = comb2(table.sum(axis=1)).sum()
    sum_b = comb2(table.sum(axis=0)).sum()
    total = comb2(np.int64(n))
    expected = sum_a * sum_b / total if total > 0 else 0.0
    maximum = (sum_a + sum_b) / 2.0
    if maximum == expected:
        return 1.0
    return float((sum_ij - expected) / (maximum - expected))
