"""Seeded synthetic housing data with a known nonlinear ground-truth price.

The generated schema mirrors the benchmark's variable list: one numeric target
(House Price), fifteen numeric features, two binary amenities, and a set of
categorical descriptors. Log price is a documented nonlinear function of
living area (with a region interaction), drive time to the central business
district, a U-shaped age effect with its minimum at 50 years, region, and
neighborhood crime level, plus Gaussian noise. The truth function is exported
so oracle tests can evaluate it independently of any fitted model.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .data import BINARY, CATEGORICAL, NUMERIC, ColumnSchema, Dataset
from .errors import ConfigError

REGION_LEVELS = ("Central", "North", "South", "East", "Gunbarrel", "Rural")
REGION_PROBS = (0.23, 0.23, 0.14, 0.20, 0.12, 0.08)

BEDROOM_LEVELS = tuple(str(i) for i in range(8))
BEDROOM_PROBS = (0.003, 0.07, 0.249, 0.28, 0.244, 0.125, 0.027, 0.002)

PROPERTY_LEVELS = ("Condominium", "Town Home", "Single Family")
PROPERTY_PROBS = (0.32, 0.09, 0.59)

CRIME_LEVELS = ("1", "2", "3")  # 1 = highest crime rate
CRIME_PROBS = (0.08, 0.50, 0.42)

ESCHOOL_PROBS = (0.33, 0.54, 0.13)
MSCHOOL_PROBS = (0.12, 0.62, 0.26)
HSCHOOL_PROBS = (0.90, 0.10)

BINARY_PROBS = {"Pool or Hot Tub": 0.35, "Solar Power": 0.29}

#: categorical marginals the generator targets, keyed by column name
CONFIGURED_MARGINALS = {
    "Region": dict(zip(REGION_LEVELS, REGION_PROBS)),
    "Number of Bedrooms": dict(zip(BEDROOM_LEVELS, BEDROOM_PROBS)),
    "Property Type": dict(zip(PROPERTY_LEVELS, PROPERTY_PROBS)),
    "Crime Level": dict(zip(CRIME_LEVELS, CRIME_PROBS)),
    "Elementary School Rank": dict(zip(("A", "B", "C"), ESCHOOL_PROBS)),
    "Middle School Rank": dict(zip(("A", "B", "C"), MSCHOOL_PROBS)),
    "High School Rank": dict(zip(("A", "B"), HSCHOOL_PROBS)),
    "Pool or Hot Tub": {"0": 0.65, "1": 0.35},
    "Solar Power": {"0": 0.71, "1": 0.29},
}

#: columns that receive injected missing cells
MISSING_TARGET_COLUMNS = ("Lot Area", "Solar Power", "Pool or Hot Tub")


def schema() -> list[ColumnSchema]:
    return [
        ColumnSchema("Property ID", NUMERIC, role="identifier"),
        ColumnSchema("House Price", NUMERIC, role="target", units="USD"),
        ColumnSchema("Lot Area", NUMERIC, units="sqft"),
        ColumnSchema("Living Area", NUMERIC, units="sqft"),
        ColumnSchema("Age", NUMERIC, units="years"),
        ColumnSchema("Number of Full Bathrooms", NUMERIC),
        ColumnSchema("Number of Half Bathrooms", NUMERIC),
        ColumnSchema("Number of Three Quarter Bathrooms", NUMERIC),
        ColumnSchema("Parking", NUMERIC, units="spaces"),
        ColumnSchema("HOA Fees", NUMERIC, units="USD/year"),
        ColumnSchema("Drive to CBD", NUMERIC, units="minutes"),
        ColumnSchema("Walk to Elementary School", NUMERIC, units="minutes"),
        ColumnSchema("Walk to Middle School", NUMERIC, units="minutes"),
        ColumnSchema("Walk to High School", NUMERIC, units="minutes"),
        ColumnSchema("Married Share", NUMERIC, units="percent"),
        ColumnSchema("Median Household Income", NUMERIC, units="USD"),
        ColumnSchema("Neighborhood Population", NUMERIC),
        ColumnSchema("Pool or Hot Tub", BINARY),
        ColumnSchema("Solar Power", BINARY),
        ColumnSchema("Elementary School Rank", CATEGORICAL, levels=("A", "B", "C")),
        ColumnSchema("Middle School Rank", CATEGORICAL, levels=("A", "B", "C")),
        ColumnSchema("High School Rank", CATEGORICAL, levels=("A", "B")),
        ColumnSchema("Region", CATEGORICAL, levels=REGION_LEVELS),
        ColumnSchema("Number of Bedrooms", CATEGORICAL, levels=BEDROOM_LEVELS),
        ColumnSchema("Property Type", CATEGORICAL, levels=PROPERTY_LEVELS),
        ColumnSchema("Crime Level", CATEGORICAL, levels=CRIME_LEVELS),
    ]


@dataclass(frozen=True)
class GeneratorConfig:
    n: int = 1018
    seed: int = 0
    noise_std: float = 0.2
    missing_rate: float = 0.03
    outlier_rate: float = 0.02

    def __post_init__(self):
        if self.n < 50:
            raise ConfigError(f"generator needs n >= 50, got {self.n}")
        if self.noise_std < 0:
            raise ConfigError("noise_std must be >= 0")
        if not 0 <= self.missing_rate < 1:
            raise ConfigError("missing_rate must be in [0, 1)")
        if not 0 <= self.outlier_rate < 1:
            raise ConfigError("outlier_rate must be in [0, 1)")


@dataclass(frozen=True)
class TruthFunction:
    """The documented log-price function.

    log_price = intercept
              + living_coef * region_living_mult[region] * ln(living/2000)
              + drive_coef * sqrt(drive_to_cbd)
              + close_in_bonus * 1[drive_to_cbd < 7]
              + age_curve * (age - 50)^2
              + region_effect[region] + crime_effect[crime]
              + full_bath_coef * full_baths + parking_coef * parking
              + solar_coef * solar + pool_coef * pool + type_effect[property_type]
    """
    intercept: float = 13.0
    living_coef: float = 0.55
    region_living_mult: dict[str, float] = field(default_factory=lambda: {
        "Central": 1.45, "North": 1.0, "South": 1.0,
        "East": 0.70, "Gunbarrel": 0.70, "Rural": 1.15})
    drive_coef: float = -0.10
    close_in_bonus: float = 0.18
    age_curve: float = 0.0003
    region_effect: dict[str, float] = field(default_factory=lambda: {
        "Central": 0.0, "North": -0.10, "South": -0.10,
        "East": -0.18, "Gunbarrel": -0.20, "Rural": -0.28})
    crime_effect: dict[str, float] = field(default_factory=lambda: {
        "1": -0.22, "2": -0.08, "3": 0.0})
    full_bath_coef: float = 0.05
    parking_coef: float = 0.03
    solar_coef: float = 0.06
    pool_coef: float = 0.02
    type_effect: dict[str, float] = field(default_factory=lambda: {
        "Condominium": -0.12, "Town Home": -0.08, "Single Family": 0.0})

    def log_price(self, row: dict) -> float:
        """Noise-free log price for one observation of raw feature values."""
        region = row["Region"]
        return (self.intercept
                + self.living_coef * self.region_living_mult[region]
                * math.log(row["Living Area"] / 2000.0)
                + self.drive_coef * math.sqrt(row["Drive to CBD"])
                + (self.close_in_bonus if row["Drive to CBD"] < 7.0 else 0.0)
                + self.age_curve * (row["Age"] - 50.0) ** 2
                + self.region_effect[region]
                + self.crime_effect[row["Crime Level"]]
                + self.full_bath_coef * row["Number of Full Bathrooms"]
                + self.parking_coef * row["Parking"]
                + self.solar_coef * float(row["Solar Power"])
                + self.pool_coef * float(row["Pool or Hot Tub"])
                + self.type_effect[row["Property Type"]])

    def to_json(self, path) -> None:
        doc = {k: getattr(self, k) for k in (
            "intercept", "living_coef", "region_living_mult", "drive_coef",
            "close_in_bonus", "age_curve", "region_effect", "crime_effect",
            "full_bath_coef", "parking_coef", "solar_coef", "pool_coef",
            "type_effect")}
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_json(cls, path) -> "TruthFunction":
        with open(path, encoding="utf-8") as fh:
            return cls(**json.load(fh))


@dataclass(frozen=True)
class SyntheticData:
    dataset: Dataset
    truth: TruthFunction


def _choice(rng, levels, probs, n):
    return rng.choice(np.array(levels, dtype=object), size=n, p=np.array(probs))


def generate(cfg: GeneratorConfig) -> SyntheticData:
    """Generate a dataset; pure function of the config."""
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n
    truth = TruthFunction()

    region = _choice(rng, REGION_LEVELS, REGION_PROBS, n)
    bedrooms = _choice(rng, BEDROOM_LEVELS, BEDROOM_PROBS, n)
    ptype = _choice(rng, PROPERTY_LEVELS, PROPERTY_PROBS, n)
    crime = _choice(rng, CRIME_LEVELS, CRIME_PROBS, n)
    eschool = _choice(rng, ("A", "B", "C"), ESCHOOL_PROBS, n)
    mschool = _choice(rng, ("A", "B", "C"), MSCHOOL_PROBS, n)
    hschool = _choice(rng, ("A", "B"), HSCHOOL_PROBS, n)
    pool = _choice(rng, ("0", "1"), (0.65, 0.35), n)
    solar = _choice(rng, ("0", "1"), (0.71, 0.29), n)

    bed_n = np.array([int(b) for b in bedrooms], dtype=float)
    type_size = np.where(ptype == "Single Family", 1.25,
                         np.where(ptype == "Town Home", 1.0, 0.72))
    living = (700.0 + 420.0 * bed_n * type_size) * rng.lognormal(0.0, 0.30, n)
    living = np.clip(living, 416.0, 10354.0)

    lot_mult = np.where(ptype == "Single Family", rng.uniform(2.5, 9.0, n),
                        np.where(ptype == "Town Home", rng.uniform(1.2, 2.5, n),
                                 rng.uniform(0.3, 1.0, n)))
    lot = living * lot_mult
    shock = rng.random(n) < cfg.outlier_rate
    lot = np.where(shock, lot * rng.uniform(5.0, 20.0, n), lot)

    age = np.round(rng.uniform(1, 98, n))
    full_bath = np.clip(np.round(bed_n / 2 + rng.uniform(-0.5, 1.0, n)), 0, 3)
    half_bath = np.clip(np.round(rng.uniform(-0.4, 1.6, n)), 0, 2)
    tq_bath = np.clip(np.round(rng.uniform(-0.4, 1.8, n)), 0, 2)
    parking = np.clip(np.round(bed_n / 2 + rng.uniform(-0.8, 1.2, n)), 0, 3)
    hoa = np.where(ptype == "Condominium", rng.uniform(1500, 7000, n),
                   np.where(ptype == "Town Home", rng.uniform(500, 4000, n),
                            rng.uniform(0, 1200, n)))

    drive_lo = {"Central": 1, "North": 5, "South": 5, "East": 5, "Gunbarrel": 12, "Rural": 15}
    drive_hi = {"Central": 8, "North": 18, "South": 18, "East": 18, "Gunbarrel": 26, "Rural": 26}
    drive = np.array([rng.uniform(drive_lo[r], drive_hi[r]) for r in region])

    walk_e = np.clip(drive * 2.0 + rng.normal(0, 8, n) + 5, 2, 68)
    walk_m = np.clip(walk_e * 1.4 + rng.normal(0, 10, n) + 3, 2, 96)
    walk_h = np.clip(walk_e * 2.0 + rng.normal(0, 14, n) + 5, 4, 122)

    income_base = {"Central": 72000, "North": 62000, "South": 60000,
                   "East": 55000, "Gunbarrel": 58000, "Rural": 52000}
    income = np.array([rng.normal(income_base[r], 12000) for r in region])
    income = np.clip(income, 19985, 96406)
    married = np.clip(rng.normal(43, 16, n), 9.9, 70.3)
    population = np.clip(rng.lognormal(math.log(25000), 0.9, n), 888, 99081)

    rows = {
        "Living Area": living, "Drive to CBD": drive, "Age": age,
        "Region": region, "Crime Level": crime,
        "Number of Full Bathrooms": full_bath, "Parking": parking,
        "Solar Power": solar, "Pool or Hot Tub": pool, "Property Type": ptype,
    }
    log_price = np.array([
        truth.log_price({k: rows[k][i] for k in rows}) for i in range(n)
    ])
    if cfg.noise_std > 0:
        log_price = log_price + rng.normal(0.0, cfg.noise_std, n)
    price = np.exp(log_price)

    columns: dict[str, np.ndarray] = {
        "Property ID": np.arange(1, n + 1, dtype=float),
        "House Price": price,
        "Lot Area": lot,
        "Living Area": living,
        "Age": age,
        "Number of Full Bathrooms": full_bath,
        "Number of Half Bathrooms": half_bath,
        "Number of Three Quarter Bathrooms": tq_bath,
        "Parking": parking,
        "HOA Fees": hoa,
        "Drive to CBD": drive,
        "Walk to Elementary School": walk_e,
        "Walk to Middle School": walk_m,
        "Walk to High School": walk_h,
        "Married Share": married,
        "Median Household Income": income,
        "Neighborhood Population": population,
        "Pool or Hot Tub": pool,
        "Solar Power": solar,
        "Elementary School Rank": eschool,
        "Middle School Rank": mschool,
        "High School Rank": hschool,
        "Region": region,
        "Number of Bedrooms": bedrooms,
        "Property Type": ptype,
        "Crime Level": crime,
    }
    sch = schema()
    missing = {c.name: np.zeros(n, dtype=bool) for c in sch}
    if cfg.missing_rate > 0:
        for name in MISSING_TARGET_COLUMNS:
            missing[name] = rng.random(n) < cfg.missing_rate
    return SyntheticData(dataset=Dataset(sch, columns, missing), truth=truth)
