"""Deterministic sample tables shaped like the two public benchmark datasets.

These generators exist so the whole pipeline – anonymization, synthesis,
training, metering, reporting – can run end to end without downloading
anything.  Column names, kinds, and roles match the real census-income and
student-performance layouts exactly (the shipped schema and hierarchy
configs apply to both), and the signal/noise mix is calibrated so model
accuracies and suppression levels land in realistic ranges.

Every function is a pure function of its seed.
"""

from __future__ import annotations

import numpy as np

from .data import DataTable

# -- census-like ----------------------------------------------------------------

_EDUCATIONS = (
    ("HS-grad", 0.322, 9),
    ("Some-college", 0.224, 10),
    ("Bachelors", 0.165, 13),
    ("Masters", 0.054, 14),
    ("Assoc-voc", 0.042, 11),
    ("11th", 0.036, 7),
    ("Assoc-acdm", 0.033, 12),
    ("10th", 0.028, 6),
    ("7th-8th", 0.020, 4),
    ("Prof-school", 0.018, 15),
    ("9th", 0.016, 5),
    ("Doctorate", 0.013, 16),
    ("12th", 0.013, 8),
    ("5th-6th", 0.010, 3),
    ("1st-4th", 0.005, 2),
    ("Preschool", 0.001, 1),
)

_RACES = (
    ("White", 0.854),
    ("Black", 0.096),
    ("Asian-Pac-Islander", 0.031),
    ("Amer-Indian-Eskimo", 0.010),
    ("Other", 0.009),
)

_COUNTRIES = (
    ("United-States", 0.539),
    ("Mexico", 0.065),
    ("Philippines", 0.035),
    ("Germany", 0.028),
    ("Canada", 0.026),
    ("Puerto-Rico", 0.024),
    ("El-Salvador", 0.022),
    ("India", 0.021),
    ("Cuba", 0.019),
    ("England", 0.018),
    ("Jamaica", 0.016),
    ("South", 0.015),
    ("China", 0.014),
    ("Italy", 0.013),
    ("Dominican-Republic", 0.012),
    ("Vietnam", 0.011),
    ("Guatemala", 0.010),
    ("Japan", 0.010),
    ("Poland", 0.009),
    ("Columbia", 0.009),
    ("Taiwan", 0.008),
    ("Haiti", 0.008),
    ("Iran", 0.007),
    ("Portugal", 0.007),
    ("Nicaragua", 0.006),
    ("Peru", 0.006),
    ("France", 0.005),
    ("Greece", 0.004),
    ("Ecuador", 0.004),
    ("Ireland", 0.004),
    ("Cambodia", 0.003),
    ("Thailand", 0.003),
    ("Laos", 0.003),
    ("Yugoslavia", 0.003),
    ("Outlying-US(Guam-USVI-etc)", 0.002),
    ("Trinadad&Tobago", 0.002),
    ("Hungary", 0.002),
    ("Honduras", 0.002),
    ("Scotland", 0.002),
    ("Hong", 0.002),
    ("Holand-Netherlands", 0.001),
)

_EDU_NUM = {name: float(num) for name, _, num in _EDUCATIONS}

# The population is a mixture of household archetypes.  Each archetype pins
# the slow-moving profile columns (workclass, marital status, relationship,
# sex, the age bracket, the usual weekly hours) and leaves the row-to-row
# variation to age within the bracket, an hours jitter, the education and
# occupation detail, and the birth country.  Two deliberately thin
# archetypes — a handful of older divorced craftsmen and of state-employed
# young laborers — sit one attribute away from a large one, so they only
# blend in once that attribute coarsens.
#
# (weight, age_lo, age_hi, workclass, marital_status, relationship, sex,
#  education_pool, occupation_pool, hours_base)
_CENSUS_ARCHETYPES = (
    (0.050, 21, 33, "Private", "Never-married", "Own-child", "Female",
     ("HS-grad", "Some-college"), ("Other-service", "Adm-clerical"), 20),
    (0.045, 21, 33, "Private", "Never-married", "Own-child", "Male",
     ("HS-grad", "11th"), ("Handlers-cleaners", "Other-service"), 20),
    (0.053, 23, 37, "Private", "Never-married", "Not-in-family", "Male",
     ("HS-grad", "11th"), ("Machine-op-inspct", "Handlers-cleaners"), 40),
    (0.052, 23, 37, "Private", "Never-married", "Not-in-family", "Female",
     ("HS-grad", "Some-college"), ("Adm-clerical", "Sales"), 40),
    (0.045, 25, 38, "Private", "Never-married", "Not-in-family", "Male",
     ("Bachelors", "Some-college"), ("Tech-support", "Craft-repair"), 40),
    (0.035, 28, 39, "Private", "Separated", "Unmarried", "Female",
     ("HS-grad", "11th"), ("Other-service", "Adm-clerical"), 40),
    (0.050, 41, 56, "Private", "Divorced", "Unmarried", "Female",
     ("HS-grad", "Some-college"), ("Adm-clerical", "Sales"), 40),
    (0.045, 41, 56, "Private", "Divorced", "Not-in-family", "Male",
     ("HS-grad", "Assoc-voc"), ("Craft-repair", "Transport-moving"), 40),
    (0.080, 26, 39, "Private", "Married-civ-spouse", "Husband", "Male",
     ("HS-grad", "Assoc-voc"), ("Craft-repair", "Machine-op-inspct"), 40),
    (0.055, 26, 39, "Private", "Married-civ-spouse", "Wife", "Female",
     ("HS-grad", "Some-college"), ("Adm-clerical", "Other-service"), 40),
    (0.055, 41, 58, "Private", "Married-civ-spouse", "Husband", "Male",
     ("Some-college", "HS-grad"), ("Sales", "Craft-repair"), 40),
    (0.065, 41, 58, "Private", "Married-civ-spouse", "Husband", "Male",
     ("Some-college", "Assoc-voc"), ("Exec-managerial", "Sales"), 50),
    (0.050, 41, 58, "Private", "Married-civ-spouse", "Wife", "Female",
     ("Bachelors", "Masters"), ("Prof-specialty", "Exec-managerial"), 40),
    (0.060, 41, 58, "Private", "Married-civ-spouse", "Husband", "Male",
     ("Masters", "Bachelors"), ("Prof-specialty", "Exec-managerial"), 50),
    (0.030, 41, 57, "Federal-gov", "Married-civ-spouse", "Husband", "Male",
     ("Some-college", "Bachelors"), ("Adm-clerical", "Exec-managerial"), 40),
    (0.030, 41, 57, "State-gov", "Married-civ-spouse", "Wife", "Female",
     ("Bachelors", "Masters"), ("Prof-specialty", "Adm-clerical"), 40),
    (0.030, 26, 39, "Local-gov", "Married-civ-spouse", "Husband", "Male",
     ("Some-college", "HS-grad"), ("Protective-serv", "Transport-moving"), 50),
    (0.035, 41, 59, "Self-emp-not-inc", "Married-civ-spouse", "Husband", "Male",
     ("HS-grad", "Some-college"), ("Craft-repair", "Sales"), 60),
    (0.025, 43, 59, "Self-emp-inc", "Married-civ-spouse", "Husband", "Male",
     ("Bachelors", "HS-grad"), ("Exec-managerial", "Sales"), 60),
    (0.035, 61, 76, "Private", "Widowed", "Not-in-family", "Female",
     ("Bachelors", "HS-grad"), ("Other-service", "Adm-clerical"), 20),
    (0.030, 61, 74, "Self-emp-not-inc", "Married-civ-spouse", "Husband", "Male",
     ("HS-grad", "7th-8th"), ("Farming-fishing", "Craft-repair"), 40),
    (0.022, 21, 32, "?", "Never-married", "Own-child", "Male",
     ("HS-grad", "11th"), ("?",), 20),
    (0.015, 41, 56, "?", "Divorced", "Unmarried", "Female",
     ("HS-grad", "Some-college"), ("?",), 20),
    (0.005, 61, 67, "Private", "Divorced", "Not-in-family", "Male",
     ("HS-grad", "Assoc-voc"), ("Craft-repair", "Transport-moving"), 40),
    (0.003, 23, 37, "State-gov", "Never-married", "Not-in-family", "Male",
     ("HS-grad", "11th"), ("Machine-op-inspct", "Handlers-cleaners"), 40),
)

# global shape of the income signal: sharpness separates the classes,
# the intercept sets the positive rate
_CENSUS_SHARPNESS = 0.88
_CENSUS_INTERCEPT = -3.55


def _pick(rng, table, n):
    names = [t[0] for t in table]
    probs = np.array([t[1] for t in table], dtype=np.float64)
    probs = probs / probs.sum()
    return rng.choice(names, size=n, p=probs)


def _pick_tilted(rng, table, gradient, tilt):
    """Draw categories whose odds shift exponentially along a per-row gradient."""
    names = [t[0] for t in table]
    base = np.array([t[1] for t in table], dtype=np.float64)
    slopes = np.array([tilt.get(name, 0.0) for name in names], dtype=np.float64)
    probs = base[None, :] * np.exp(gradient[:, None] * slopes[None, :])
    probs /= probs.sum(axis=1, keepdims=True)
    edges = np.cumsum(probs, axis=1)
    idx = (rng.random(gradient.shape[0])[:, None] > edges).sum(axis=1)
    return np.array(names, dtype="U")[idx]


def make_census_like(n_rows: int = 5400, seed: int = 7) -> DataTable:
    """An income table with the census layout: 15 columns, "?" markers in
    the work columns, a near-unique sampling-weight column, and a mildly
    nonseparable binary income split around 24% positive."""
    rng = np.random.default_rng(seed)
    n = int(n_rows)

    weights = np.array([a[0] for a in _CENSUS_ARCHETYPES], dtype=np.float64)
    arch = rng.choice(len(_CENSUS_ARCHETYPES), size=n, p=weights / weights.sum())

    age = np.zeros(n, dtype=np.float64)
    workclass = np.empty(n, dtype=object)
    education = np.empty(n, dtype=object)
    marital = np.empty(n, dtype=object)
    occupation = np.empty(n, dtype=object)
    relationship = np.empty(n, dtype=object)
    sex = np.empty(n, dtype=object)
    hours = np.zeros(n, dtype=np.float64)

    for i, spec in enumerate(_CENSUS_ARCHETYPES):
        (_, age_lo, age_hi, work, mar, rel, sx, edu_pool, occ_pool, hours_base) = spec
        rows = np.flatnonzero(arch == i)
        m = rows.size
        if m == 0:
            continue
        age[rows] = rng.integers(age_lo, age_hi + 1, size=m).astype(np.float64)
        workclass[rows] = work
        marital[rows] = mar
        relationship[rows] = rel
        sex[rows] = sx
        edu_p = (0.62, 0.38) if len(edu_pool) == 2 else None
        education[rows] = rng.choice(edu_pool, size=m, p=edu_p)
        occ_p = (0.6, 0.4) if len(occ_pool) == 2 else None
        occupation[rows] = rng.choice(occ_pool, size=m, p=occ_p)
        hours[rows] = hours_base + rng.choice(
            [0, 3, 6, 9], size=m, p=[0.45, 0.25, 0.2, 0.1]
        )

    education_num = np.array([_EDU_NUM[e] for e in education], dtype=np.float64)
    fnlwgt = rng.integers(12285, 1484706, size=n).astype(np.float64)
    race = _pick(rng, _RACES, n)
    country = _pick(rng, _COUNTRIES, n)

    married = (marital == "Married-civ-spouse").astype(np.float64)
    male = (sex == "Male").astype(np.float64)

    has_gain = rng.random(n) < 0.082
    capital_gain = np.where(
        has_gain, np.round(np.exp(rng.normal(8.6, 0.8, n))), 0.0
    )
    capital_gain = np.clip(capital_gain, 0, 99999)
    has_loss = rng.random(n) < 0.047
    capital_loss = np.where(has_loss, np.round(rng.normal(1870, 280, n)), 0.0)
    capital_loss = np.clip(capital_loss, 0, 4356)

    occ_effect = {
        "Exec-managerial": 0.95,
        "Prof-specialty": 0.85,
        "Tech-support": 0.45,
        "Sales": 0.20,
        "Protective-serv": 0.20,
        "Craft-repair": 0.0,
        "Adm-clerical": -0.10,
        "Transport-moving": -0.10,
        "Machine-op-inspct": -0.45,
        "Farming-fishing": -0.75,
        "Handlers-cleaners": -0.85,
        "Other-service": -1.05,
        "Priv-house-serv": -1.30,
        "Armed-Forces": 0.0,
        "?": -0.20,
    }
    logit = _CENSUS_SHARPNESS * (
        _CENSUS_INTERCEPT
        + 0.50 * (age - 38.6) / 13.2
        + 1.60 * (education_num - 10.0) / 2.6
        + 1.10 * married
        + 0.85 * (hours - 41.0) / 11.5
        + 1.15 * capital_gain / 15000.0
        + 0.50 * capital_loss / 2200.0
        + 0.30 * male
        + 0.8 * np.array([occ_effect[o] for o in occupation])
    )
    income_p = 1.0 / (1.0 + np.exp(-logit))
    income = np.where(rng.random(n) < income_p, ">50K", "<=50K").astype(object)

    return DataTable(
        [
            ("age", age),
            ("workclass", workclass),
            ("fnlwgt", fnlwgt),
            ("education", education),
            ("education_num", education_num),
            ("marital_status", marital),
            ("occupation", occupation),
            ("relationship", relationship),
            ("race", race),
            ("sex", sex),
            ("capital_gain", capital_gain),
            ("capital_loss", capital_loss),
            ("hours_per_week", hours),
            ("native_country", country),
            ("income", income),
        ]
    )


# -- student-like -----------------------------------------------------------------

_MJOBS = (("other", 0.36), ("services", 0.26), ("at_home", 0.15), ("teacher", 0.13), ("health", 0.10))
_FJOBS = (("other", 0.55), ("services", 0.28), ("teacher", 0.07), ("at_home", 0.06), ("health", 0.04))
_REASONS = (("course", 0.44), ("home", 0.27), ("reputation", 0.22), ("other", 0.07))
_GUARDIANS = (("mother", 0.69), ("father", 0.23), ("other", 0.08))
_JOB_TILT = {"teacher": 1.2, "health": 0.7, "services": 0.1, "other": -0.25, "at_home": -0.8}


def _yesno(rng, n, p_yes):
    return rng.choice(["yes", "no"], size=n, p=[p_yes, 1.0 - p_yes])


def make_student_like(n_rows: int = 660, seed: int = 11) -> DataTable:
    """A grades table in the student layout: ordinal 0-5 scales, yes/no
    flags, and a final grade whose pass/fail split is predictable but far
    from clean.  The alcohol/health scales move together (weekend drinking
    tracks weekday drinking, self-reported health runs against it), so
    their joint support is a populated ridge rather than a full grid."""
    rng = np.random.default_rng(seed)
    n = int(n_rows)

    school = rng.choice(["GP", "MS"], size=n, p=[0.65, 0.35])
    sex = rng.choice(["F", "M"], size=n, p=[0.53, 0.47])
    address = rng.choice(["U", "R"], size=n, p=[0.70, 0.30])
    famsize = rng.choice(["GT3", "LE3"], size=n, p=[0.71, 0.29])
    pstatus = rng.choice(["T", "A"], size=n, p=[0.88, 0.12])
    medu = np.clip(np.round(rng.normal(2.5, 1.1, n)), 0, 4)
    fedu = np.clip(np.round(medu + rng.normal(0.0, 0.9, n)), 0, 4)
    mjob = _pick_tilted(rng, _MJOBS, medu - 2.5, _JOB_TILT)
    fjob = _pick_tilted(rng, _FJOBS, fedu - 2.5, _JOB_TILT)
    reason = _pick(rng, _REASONS, n)
    guardian = _pick(rng, _GUARDIANS, n)
    traveltime = np.clip(np.round(rng.gamma(2.0, 0.75, n)), 1, 4)
    studytime = np.clip(np.round(rng.gamma(2.3, 0.9, n)), 1, 4)
    failures = np.clip(np.round(rng.gamma(0.35, 1.0, n)), 0, 3)
    # students who repeated a year are older when they sit the course
    age = np.clip(np.round(rng.normal(16.55, 1.05, n) + 0.55 * failures), 15, 22)
    famrel = np.clip(np.round(rng.normal(3.9, 0.9, n)), 1, 5)
    freetime = np.clip(np.round(rng.normal(3.2, 1.0, n)), 1, 5)
    goout = np.clip(np.round(rng.normal(3.1, 1.1, n)), 1, 5)
    dalc = rng.choice([1, 2, 3, 4, 5], size=n, p=[0.44, 0.30, 0.15, 0.08, 0.03])
    walc = np.clip(dalc + rng.choice([0, 1, 2], size=n, p=[0.50, 0.35, 0.15]), 1, 5)
    health = np.clip(6 - walc + rng.choice([-1, 0, 1], size=n, p=[0.30, 0.40, 0.30]), 1, 5)
    absences = np.clip(np.round(rng.gamma(1.1, 4.2, n)), 0, 40)
    # Support and aspiration flags follow the academic covariates instead of
    # flipping independently: extra help goes to students with past failures,
    # paid classes follow the mother's education.
    schoolsup = np.where(
        rng.random(n) < 0.06 + 0.22 * (failures > 0) + 0.06 * (studytime < 2), "yes", "no"
    )
    famsup = np.where(rng.random(n) < 0.52 + 0.16 * (medu >= 3), "yes", "no")
    paid = np.where(rng.random(n) < 0.22 + 0.22 * (medu >= 3), "yes", "no")
    activities = _yesno(rng, n, 0.51)
    nursery = np.where(rng.random(n) < 0.70 + 0.15 * (medu >= 2), "yes", "no")
    higher = np.where(
        rng.random(n) < 0.97 - 0.10 * (studytime < 2) - 0.22 * (failures > 0), "yes", "no"
    )
    internet = np.where(
        rng.random(n) < 0.66 + 0.12 * (address == "U") + 0.10 * (medu >= 3), "yes", "no"
    )
    romantic = np.where(rng.random(n) < 0.24 + 0.18 * (goout >= 4), "yes", "no")

    g3 = (
        10.00
        + 1.45 * (studytime - 2.0)
        - 2.40 * failures
        + 0.60 * (medu - 2.5)
        + 1.10 * (higher == "yes").astype(np.float64)
        - 0.70 * (goout - 3.1)
        - 0.55 * (walc - 2.55)
        - 0.35 * (traveltime - 1.9)
        - 0.060 * absences
        + rng.normal(0.0, 1.70, n)
    )
    g3 = np.clip(np.round(g3), 0, 20)

    return DataTable(
        [
            ("school", school),
            ("sex", sex),
            ("age", age),
            ("address", address),
            ("famsize", famsize),
            ("Pstatus", pstatus),
            ("Medu", medu),
            ("Fedu", fedu),
            ("Mjob", mjob),
            ("Fjob", fjob),
            ("reason", reason),
            ("guardian", guardian),
            ("traveltime", traveltime),
            ("studytime", studytime),
            ("failures", failures),
            ("schoolsup", schoolsup),
            ("famsup", famsup),
            ("paid", paid),
            ("activities", activities),
            ("nursery", nursery),
            ("higher", higher),
            ("internet", internet),
            ("romantic", romantic),
            ("famrel", famrel),
            ("freetime", freetime),
            ("goout", goout),
            ("Dalc", dalc),
            ("Walc", walc),
            ("health", health),
            ("absences", absences),
            ("G3", g3),
        ]
    )
