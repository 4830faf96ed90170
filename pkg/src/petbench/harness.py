"""Experiment harness: run the treatment/model grid with energy metering and
turn the resulting run log into report tables.

The grid is dataset x treatment x model x repetition.  Every repetition
produces one metered ``prepare`` record (the train/test split), one metered
``treat`` record per treatment (anonymization, synthesis, or nothing for the
benchmark), and metered ``train`` and ``evaluate`` records per model.
Evaluation always happens on held-out original rows; when a treatment
rewrites quasi-identifying columns the same rewrite is applied to the test
features so the model sees the representation it was trained on, but the
labels stay untouched.

Records land in an append-only JSON-lines log.  Re-running a configuration
whose hash is already in the log is refused unless ``overwrite`` is set, in
which case only that configuration's records are replaced.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import os
import tempfile
import urllib.error
import urllib.request
import zipfile
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from . import energy, learners, synthesis
from .anonymity import Hierarchy, anonymize, apply_state, hierarchies_from_config
from .data import (
    AttributeSchema,
    DataTable,
    Encoder,
    SplitSpec,
    load_csv,
    split,
)
from .stats import Alternative, Method, PairwiseMatrix, pairwise_matrix
from .tradeoff import PrivacyScale

MODELS = ("knn", "logreg", "nn")
PHASES = ("prepare", "treat", "train", "evaluate")


class DigestMismatchError(RuntimeError):
    """A fetched or cached dataset file does not match its recorded digest."""

    def __init__(self, filename: str, expected: str, got: str):
        self.filename = filename
        self.expected = expected
        self.got = got
        super().__init__(
            f"{filename}: sha256 {got} does not match the recorded digest {expected}"
        )


class NetworkError(RuntimeError):
    """A dataset download failed; nothing was written."""


class LogExistsError(RuntimeError):
    """The run log already holds records for this configuration hash."""


class MissingBenchmarkError(ValueError):
    """Deviations need benchmark records for every (dataset, model) pair."""


class EmptyLogError(ValueError):
    """No usable records were found in the run log."""


class ReportIoError(RuntimeError):
    """Writing a rendered report to disk failed."""


# -- treatments -------------------------------------------------------------------


@dataclass(frozen=True)
class Treatment:
    """One arm of the comparison: benchmark, k-anonymization, or synthesis."""

    kind: str  # "benchmark" | "kanon" | "synthetic"
    k: int | None = None

    def __post_init__(self):
        if self.kind not in ("benchmark", "kanon", "synthetic"):
            raise ValueError(f"unknown treatment kind {self.kind!r}")
        if self.kind == "kanon":
            if self.k is None or self.k < 1:
                raise ValueError("k-anonymization needs k >= 1")
        elif self.k is not None:
            raise ValueError(f"treatment {self.kind!r} takes no k")

    @property
    def key(self) -> str:
        """Stable identifier used in logs, tables, and configs."""
        if self.kind == "kanon":
            return f"k={self.k}"
        return self.kind

    @property
    def label(self) -> str:
        """Human-readable name used in rendered reports."""
        if self.kind == "benchmark":
            return "Benchmark"
        if self.kind == "synthetic":
            return "Synthetic data"
        return self.key

    @classmethod
    def benchmark(cls) -> "Treatment":
        return cls("benchmark")

    @classmethod
    def kanon(cls, k: int) -> "Treatment":
        return cls("kanon", k)

    @classmethod
    def synthetic(cls) -> "Treatment":
        return cls("synthetic")

    @classmethod
    def parse(cls, text: str) -> "Treatment":
        """Parse a treatment key like ``benchmark``, ``k=10``, ``synthetic``."""
        text = text.strip()
        if text == "benchmark":
            return cls.benchmark()
        if text == "synthetic":
            return cls.synthetic()
        if text.startswith("k="):
            try:
                return cls.kanon(int(text[2:]))
            except ValueError as exc:
                raise ValueError(f"bad treatment {text!r}") from exc
        raise ValueError(f"unknown treatment {text!r}")


DEFAULT_TREATMENTS = (
    Treatment.benchmark(),
    Treatment.kanon(3),
    Treatment.kanon(10),
    Treatment.kanon(27),
    Treatment.synthetic(),
)


def privacy_scale_for(treatment_keys: Iterable[str]) -> PrivacyScale:
    """Build a privacy ordering from treatment keys.

    Benchmark sits at 0, k-anonymization ranks increase with k, and
    synthesis ties the strongest k-anonymization present.
    """
    keys = list(dict.fromkeys(treatment_keys))
    ks = sorted(int(key[2:]) for key in keys if key.startswith("k="))
    ranks: dict[str, int] = {}
    for key in keys:
        if key == "benchmark":
            ranks[key] = 0
        elif key.startswith("k="):
            ranks[key] = 1 + ks.index(int(key[2:]))
        elif key == "synthetic":
            ranks[key] = max(len(ks), 1)
        else:
            raise ValueError(f"unknown treatment key {key!r}")
    return PrivacyScale(ranks)


# -- dataset registry ---------------------------------------------------------------


@dataclass(frozen=True)
class DatasetFile:
    """One downloadable artifact; ``sha256`` of None means trust on first fetch."""

    filename: str
    url: str
    sha256: str | None = None
    zip_member: str | None = None


@dataclass(frozen=True)
class DatasetSpec:
    dataset_id: str
    title: str
    dialect: str
    header: bool
    schema_config: str
    hierarchy_config: str
    files: tuple[DatasetFile, ...] = ()
    data_file: str | None = None
    column_names: tuple[str, ...] | None = None
    generator: str | None = None  # sampledata function for offline fixtures


_CENSUS_COLUMNS = (
    "age", "workclass", "fnlwgt", "education", "education_num",
    "marital_status", "occupation", "relationship", "race", "sex",
    "capital_gain", "capital_loss", "hours_per_week", "native_country",
    "income",
)

DATASETS: dict[str, DatasetSpec] = {
    "census_income": DatasetSpec(
        dataset_id="census_income",
        title="Census income",
        dialect="comma",
        header=False,
        schema_config="census_income_schema.json",
        hierarchy_config="census_income_hierarchies.json",
        files=(
            DatasetFile(
                filename="adult.data",
                url="https://archive.ics.uci.edu/ml/machine-learning-databases/adult/adult.data",
            ),
        ),
        data_file="adult.data",
        column_names=_CENSUS_COLUMNS,
    ),
    "student_performance": DatasetSpec(
        dataset_id="student_performance",
        title="Student performance",
        dialect="semicolon",
        header=True,
        schema_config="student_performance_schema.json",
        hierarchy_config="student_performance_hierarchies.json",
        files=(
            DatasetFile(
                filename="student-mat.csv",
                url="https://archive.ics.uci.edu/ml/machine-learning-databases/00320/student.zip",
                zip_member="student-mat.csv",
            ),
        ),
        data_file="student-mat.csv",
    ),
    "census_fixture": DatasetSpec(
        dataset_id="census_fixture",
        title="Census income (generated stand-in)",
        dialect="comma",
        header=False,
        schema_config="census_income_schema.json",
        hierarchy_config="census_income_hierarchies.json",
        column_names=_CENSUS_COLUMNS,
        generator="make_census_like",
    ),
    "student_fixture": DatasetSpec(
        dataset_id="student_fixture",
        title="Student performance (generated stand-in)",
        dialect="semicolon",
        header=True,
        schema_config="student_performance_schema.json",
        hierarchy_config="student_performance_hierarchies.json",
        generator="make_student_like",
    ),
}


def dataset_spec(dataset_id: str) -> DatasetSpec:
    try:
        return DATASETS[dataset_id]
    except KeyError:
        known = ", ".join(sorted(DATASETS))
        raise ValueError(f"unknown dataset {dataset_id!r}; known: {known}") from None


def _config_text(name: str) -> str:
    return resources.files("petbench").joinpath("configs", name).read_text(encoding="utf-8")


def load_schema(dataset_id: str) -> AttributeSchema:
    return AttributeSchema.from_json(_config_text(dataset_spec(dataset_id).schema_config))


def load_hierarchies(dataset_id: str) -> dict[str, Hierarchy]:
    config = json.loads(_config_text(dataset_spec(dataset_id).hierarchy_config))
    return hierarchies_from_config(config)


@dataclass
class LoadedDataset:
    spec: DatasetSpec
    table: DataTable
    schema: AttributeSchema
    hierarchies: dict[str, Hierarchy]


def load_dataset(dataset_id: str, data_dir=None) -> LoadedDataset:
    """Load a registry dataset, generating it when it is a fixture."""
    spec = dataset_spec(dataset_id)
    schema = load_schema(dataset_id)
    hierarchies = load_hierarchies(dataset_id)
    if spec.generator is not None:
        from . import sampledata

        table = getattr(sampledata, spec.generator)()
    else:
        if data_dir is None:
            raise ValueError(f"dataset {dataset_id!r} needs a data_dir with its files")
        path = Path(data_dir) / spec.data_file
        if not path.exists():
            raise FileNotFoundError(
                f"{path} not found; fetch the dataset first (fetch {dataset_id!r})"
            )
        table = load_csv(
            path,
            dialect=spec.dialect,
            header=spec.header,
            schema=schema,
            column_names=spec.column_names,
        )
    return LoadedDataset(spec, table, schema, hierarchies)


# -- fetching ------------------------------------------------------------------------

_DIGEST_LOCK = "digests.json"


def _sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def _read_lock(dest: Path) -> dict[str, str]:
    lock = dest / _DIGEST_LOCK
    if lock.exists():
        return json.loads(lock.read_text(encoding="utf-8"))
    return {}


def _write_lock(dest: Path, entries: Mapping[str, str]) -> None:
    lock = dest / _DIGEST_LOCK
    lock.write_text(json.dumps(dict(sorted(entries.items())), indent=2) + "\n", encoding="utf-8")


def _download(url: str, out_path: Path, timeout: float) -> None:
    try:
        with urllib.request.urlopen(url, timeout=timeout) as response:
            with open(out_path, "wb") as fh:
                while True:
                    block = response.read(1 << 20)
                    if not block:
                        break
                    fh.write(block)
    except (urllib.error.URLError, OSError) as exc:
        out_path.unlink(missing_ok=True)
        raise NetworkError(f"downloading {url} failed: {exc}") from exc


def fetch_dataset(dataset_id: str, dest, timeout: float = 60.0) -> list[Path]:
    """Download a dataset's files into ``dest`` and pin their digests.

    Files already present are verified against the digest registry (the
    spec's pinned value if it has one, otherwise ``digests.json`` in the
    destination) and left alone when they match.  A file seen for the first
    time has its digest recorded; a mismatch raises
    :class:`DigestMismatchError`.  Downloads go through a temporary file and
    are renamed into place only after the digest check, so a failed fetch
    leaves no partial files behind.
    """
    spec = dataset_spec(dataset_id)
    if not spec.files:
        raise ValueError(f"dataset {dataset_id!r} is generated locally; nothing to fetch")
    dest = Path(dest)
    dest.mkdir(parents=True, exist_ok=True)
    lock = _read_lock(dest)
    out_paths = []
    for file_spec in spec.files:
        target = dest / file_spec.filename
        expected = file_spec.sha256 or lock.get(file_spec.filename)
        if target.exists():
            got = _sha256_file(target)
            if expected is None:  # pre-placed file: trust on first sight
                lock[file_spec.filename] = got
            elif got != expected:
                raise DigestMismatchError(file_spec.filename, expected, got)
            out_paths.append(target)
            continue
        fd, tmp_name = tempfile.mkstemp(dir=dest, prefix=file_spec.filename + ".", suffix=".part")
        os.close(fd)
        tmp = Path(tmp_name)
        try:
            if file_spec.zip_member is not None:
                archive = Path(str(tmp) + ".zip")
                try:
                    _download(file_spec.url, archive, timeout)
                    with zipfile.ZipFile(archive) as zf, open(tmp, "wb") as out:
                        out.write(zf.read(file_spec.zip_member))
                finally:
                    archive.unlink(missing_ok=True)
            else:
                _download(file_spec.url, tmp, timeout)
            got = _sha256_file(tmp)
            if expected is not None and got != expected:
                raise DigestMismatchError(file_spec.filename, expected, got)
            lock[file_spec.filename] = got
            os.replace(tmp, target)
        finally:
            tmp.unlink(missing_ok=True)
        out_paths.append(target)
    _write_lock(dest, lock)
    return out_paths


# -- experiment configuration ----------------------------------------------------------


@dataclass(frozen=True)
class MeterConfig:
    """Which energy meter to run and, for the simulated one, how it behaves."""

    backend: str = "simulated"  # "simulated" | "sysfs"
    watts: float = 40.0
    deterministic: bool = False  # fixed-step virtual clock instead of wall time
    step_s: float = 0.25
    root: str | None = None  # powercap root override for the sysfs backend

    def __post_init__(self):
        if self.backend not in ("simulated", "sysfs"):
            raise ValueError(f"unknown meter backend {self.backend!r}")
        if self.watts < 0:
            raise ValueError("watts must be non-negative")
        if self.step_s <= 0:
            raise ValueError("step_s must be positive")

    def build(self) -> energy.Meter:
        if self.backend == "simulated":
            clock = energy.VirtualClock(self.step_s) if self.deterministic else None
            return energy.open_meter(energy.SimulatedPower(self.watts, clock=clock))
        return energy.open_meter(energy.SysfsRapl(root=self.root))


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything that defines one benchmark run of the full grid."""

    dataset: str
    treatments: tuple[Treatment, ...] = DEFAULT_TREATMENTS
    models: tuple[str, ...] = MODELS
    repetitions: int = 10
    master_seed: int = 2024
    split: SplitSpec = SplitSpec()
    meter: MeterConfig = MeterConfig()
    idle_watts: float = 0.0
    data_dir: str | None = None
    suppression_budget: float = 1.0
    k_plus_one: bool = False
    train_overrides: Mapping[str, Mapping[str, object]] = field(default_factory=dict)

    def __post_init__(self):
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if not self.models:
            raise ValueError("at least one model is required")
        for m in self.models:
            if m not in MODELS:
                raise ValueError(f"unknown model {m!r}; known: {', '.join(MODELS)}")
        if len(set(self.models)) != len(self.models):
            raise ValueError("duplicate models")
        keys = [t.key for t in self.treatments]
        if len(set(keys)) != len(keys):
            raise ValueError("duplicate treatments")
        if "benchmark" not in keys:
            raise ValueError("the treatment list must include the benchmark")
        if self.idle_watts < 0:
            raise ValueError("idle_watts must be non-negative")
        for m in self.train_overrides:
            if m not in MODELS:
                raise ValueError(f"train override for unknown model {m!r}")

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "treatments": [t.key for t in self.treatments],
            "models": list(self.models),
            "repetitions": self.repetitions,
            "master_seed": self.master_seed,
            "split": {"fraction": self.split.fraction, "seed": self.split.seed},
            "meter": {
                "backend": self.meter.backend,
                "watts": self.meter.watts,
                "deterministic": self.meter.deterministic,
                "step_s": self.meter.step_s,
                "root": self.meter.root,
            },
            "idle_watts": self.idle_watts,
            "data_dir": self.data_dir,
            "suppression_budget": self.suppression_budget,
            "k_plus_one": self.k_plus_one,
            "train_overrides": {m: dict(o) for m, o in self.train_overrides.items()},
        }

    @classmethod
    def from_dict(cls, raw: Mapping) -> "ExperimentConfig":
        known = {
            "dataset", "treatments", "models", "repetitions", "master_seed",
            "split", "meter", "idle_watts", "data_dir", "suppression_budget",
            "k_plus_one", "train_overrides",
        }
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
        kwargs: dict = {"dataset": raw["dataset"]}
        if "treatments" in raw:
            kwargs["treatments"] = tuple(Treatment.parse(t) for t in raw["treatments"])
        if "models" in raw:
            kwargs["models"] = tuple(raw["models"])
        for key in ("repetitions", "master_seed", "idle_watts", "data_dir",
                    "suppression_budget", "k_plus_one"):
            if key in raw:
                kwargs[key] = raw[key]
        if "split" in raw:
            kwargs["split"] = SplitSpec(**raw["split"])
        if "meter" in raw:
            kwargs["meter"] = MeterConfig(**raw["meter"])
        if "train_overrides" in raw:
            kwargs["train_overrides"] = {m: dict(o) for m, o in raw["train_overrides"].items()}
        return cls(**kwargs)

    @classmethod
    def from_json_file(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    @property
    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]


def derive_seed(master_seed: int, *parts: object) -> int:
    """A stable 63-bit seed for one grid coordinate, split off the master seed."""
    text = ":".join([str(master_seed), *(str(p) for p in parts)])
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


# -- run records -------------------------------------------------------------------


@dataclass
class RunRecord:
    """One metered phase of one grid cell, as logged."""

    dataset: str
    treatment: str | None
    model: str | None
    repetition: int
    phase: str
    status: str  # "ok" | "error"
    duration_s: float
    joules: float
    joules_adjusted: float
    t_start: float
    t_end: float
    config_hash: str
    error: str | None = None
    accuracy: float | None = None
    log_loss: float | None = None
    detail: dict | None = None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, raw: Mapping) -> "RunRecord":
        return cls(**{f.name: raw.get(f.name) for f in dataclasses.fields(cls)})


def _record_line(record: RunRecord) -> str:
    return json.dumps(record.to_dict(), sort_keys=True, separators=(",", ":"))


def read_log(path) -> list[dict]:
    """Read a JSON-lines run log into a list of record dicts."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def append_records(path, records: Sequence[RunRecord], overwrite: bool = False) -> None:
    """Append records to a JSON-lines log, one configuration at a time.

    If the log already contains records with the same configuration hash the
    call is refused, unless ``overwrite`` is set, in which case exactly those
    records are replaced and every other configuration's records are kept.
    """
    if not records:
        return
    path = Path(path)
    new_hash = records[0].config_hash
    existing_lines: list[str] = []
    if path.exists():
        kept, dropped = [], 0
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                if json.loads(line).get("config_hash") == new_hash:
                    dropped += 1
                else:
                    kept.append(line)
        if dropped and not overwrite:
            raise LogExistsError(
                f"{path} already holds {dropped} records for configuration "
                f"{new_hash}; pass overwrite to replace them"
            )
        existing_lines = kept
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in existing_lines:
            fh.write(line + "\n")
        for record in records:
            fh.write(_record_line(record) + "\n")


# -- running the grid -----------------------------------------------------------------


def _train_config(model: str, overrides: Mapping[str, object], seed: int) -> learners.TrainConfig:
    if model == "logreg":
        base = {"learning_rate": 0.1, "epochs": 300, "batch_size": None, "l2": 0.0}
    else:
        base = {"learning_rate": 0.01, "epochs": 50, "batch_size": 32, "l2": 0.0}
    for key, value in overrides.items():
        if key in ("hidden", "k"):
            continue
        if key not in base:
            raise ValueError(f"unknown training override {key!r} for {model}")
        base[key] = value
    return learners.TrainConfig(seed=seed, **base)


@dataclass
class _TreatedData:
    """A treatment's training table plus the aligned held-out test table."""

    train: DataTable
    test: DataTable
    schema: AttributeSchema
    detail: dict | None


def _apply_treatment(
    treatment: Treatment,
    train_table: DataTable,
    test_table: DataTable,
    loaded: LoadedDataset,
    config: ExperimentConfig,
    rep: int,
) -> _TreatedData:
    schema = loaded.schema
    if treatment.kind == "benchmark":
        return _TreatedData(train_table, test_table, schema, None)
    if treatment.kind == "kanon":
        anonymized, report = anonymize(
            train_table,
            schema,
            loaded.hierarchies,
            treatment.k,
            max_record_suppression=config.suppression_budget,
            k_plus_one=config.k_plus_one,
        )
        reduced = schema.drop(report.identifying_removed)
        aligned = apply_state(
            test_table.drop([c for c in report.identifying_removed if c in test_table.names]),
            report.state,
            reduced,
            loaded.hierarchies,
        )
        detail = {
            "requested_k": report.requested_k,
            "min_class_size": report.min_class_size,
            "generalization": report.state.as_dict(),
            "suppressed_records": report.suppressed_records,
            "suppressed_cell_fraction": report.suppressed_cell_fraction,
            "identifying_removed": list(report.identifying_removed),
        }
        return _TreatedData(anonymized, aligned, reduced, detail)
    # synthetic: fit on the training part, sample the same number of rows
    model = synthesis.fit(train_table)
    seed = derive_seed(config.master_seed, config.dataset, "synthetic", rep)
    synthesized = synthesis.sample(model, train_table.n_rows, seed)
    return _TreatedData(synthesized, test_table, schema, {"rows": synthesized.n_rows, "seed": seed})


def _fit_model(model_name: str, x: np.ndarray, y: np.ndarray, seed: int,
               overrides: Mapping[str, object]):
    if model_name == "knn":
        return learners.KnnModel(x, y, k=int(overrides.get("k", 5)))
    if model_name == "logreg":
        return learners.train_logreg(x, y, _train_config("logreg", overrides, seed))
    return learners.train_nn(
        x, y, _train_config("nn", overrides, seed), hidden=int(overrides.get("hidden", 64))
    )


def _evaluate_model(model_name: str, model, x: np.ndarray, y: np.ndarray) -> learners.EvalResult:
    if model_name == "knn":
        return learners.accuracy(model.predict(x), y)
    return learners.evaluate_probabilities(model.predict_proba(x), y)


def run_experiment(
    config: ExperimentConfig,
    log_path=None,
    overwrite: bool = False,
    progress: Callable[[str], None] | None = None,
) -> list[RunRecord]:
    """Run the full grid and return (and optionally log) its records.

    A failure inside one phase produces an error record for that phase,
    skips the rest of its cell, and moves on; the rest of the grid still
    runs.  Timestamps come from the meter's clock so deterministic meters
    yield byte-identical logs.
    """
    loaded = load_dataset(config.dataset, config.data_dir)
    meter = config.meter.build()
    baseline = energy.IdleBaseline(
        watts=config.idle_watts, duration_s=0.0, joules=0.0, backend=meter.backend_name
    )
    config_hash = config.config_hash
    records: list[RunRecord] = []

    def note(text: str) -> None:
        if progress is not None:
            progress(text)

    def metered(label: str, fn: Callable[[], object]):
        """Run one phase under the meter; returns (result, sample, error)."""
        result, error, handle_ref = None, None, None
        try:
            with meter.session(label) as handle:
                handle_ref = handle
                result = fn()
        except Exception as exc:  # noqa: BLE001 - error records keep the grid going
            if handle_ref is None:  # the meter itself failed; don't mask that
                raise
            error = f"{type(exc).__name__}: {exc}"
        sample = energy.adjust(handle_ref.sample, baseline)
        return result, sample, error

    def push(sample, *, treatment=None, model=None, rep=0, phase, error=None,
             accuracy=None, log_loss=None, detail=None) -> RunRecord:
        record = RunRecord(
            dataset=config.dataset,
            treatment=treatment,
            model=model,
            repetition=rep,
            phase=phase,
            status="ok" if error is None else "error",
            duration_s=sample.duration_s,
            joules=sample.joules,
            joules_adjusted=sample.adjusted_joules,
            t_start=sample.t_start,
            t_end=sample.t_end,
            config_hash=config_hash,
            error=error,
            accuracy=accuracy,
            log_loss=log_loss,
            detail=detail,
        )
        records.append(record)
        return record

    for rep in range(config.repetitions):
        split_seed = derive_seed(config.master_seed, config.dataset, "split", rep)
        rep_split = SplitSpec(fraction=config.split.fraction, seed=split_seed)
        parts, sample, error = metered("prepare", lambda: split(loaded.table, rep_split))
        push(sample, rep=rep, phase="prepare", error=error,
             detail={"split_seed": split_seed, "fraction": rep_split.fraction})
        if error is not None:
            continue
        train_table, test_table = parts

        for treatment in config.treatments:
            note(f"rep {rep} {treatment.key}")
            treated, sample, error = metered(
                "treat",
                lambda: _apply_treatment(treatment, train_table, test_table, loaded, config, rep),
            )
            push(sample, treatment=treatment.key, rep=rep, phase="treat", error=error,
                 detail=None if treated is None else treated.detail)
            if error is not None:
                continue

            for model_name in config.models:
                overrides = dict(config.train_overrides.get(model_name, {}))
                seed = derive_seed(config.master_seed, config.dataset, treatment.key,
                                   model_name, rep)

                def train_phase():
                    encoder = Encoder(treated.schema).fit(treated.train)
                    encoded = encoder.transform(treated.train)
                    model = _fit_model(model_name, encoded.matrix, encoded.labels,
                                       seed, overrides)
                    return encoder, encoded, model

                result, sample, error = metered("train", train_phase)
                detail = None
                if result is not None:
                    detail = {
                        "features": len(result[1].feature_names),
                        "rows": int(result[1].matrix.shape[0]),
                        "dropped_rows": result[1].dropped_rows,
                        "seed": seed,
                    }
                push(sample, treatment=treatment.key, model=model_name, rep=rep,
                     phase="train", error=error, detail=detail)
                if error is not None:
                    continue
                encoder, _, model = result

                def evaluate_phase():
                    encoded = encoder.transform(treated.test)
                    outcome = _evaluate_model(model_name, model, encoded.matrix, encoded.labels)
                    return encoded, outcome

                result, sample, error = metered("evaluate", evaluate_phase)
                accuracy = log_loss = None
                detail = None
                if result is not None:
                    encoded, outcome = result
                    accuracy = outcome.accuracy
                    log_loss = outcome.log_loss
                    detail = {"rows": int(encoded.matrix.shape[0]),
                              "dropped_rows": encoded.dropped_rows}
                push(sample, treatment=treatment.key, model=model_name, rep=rep,
                     phase="evaluate", error=error, accuracy=accuracy,
                     log_loss=log_loss, detail=detail)

    if log_path is not None:
        append_records(log_path, records, overwrite=overwrite)
    return records


# -- report tables ---------------------------------------------------------------------


def _round_half_away(x: float) -> int:
    return int(math.floor(x + 0.5)) if x >= 0 else int(math.ceil(x - 0.5))


def _ok(records: Iterable) -> list[Mapping]:
    """Keep only successful records, accepting RunRecord objects or log dicts."""
    dicts = (r.to_dict() if isinstance(r, RunRecord) else r for r in records)
    return [r for r in dicts if r.get("status") == "ok"]


def _appearance_order(values: Iterable) -> list:
    return list(dict.fromkeys(values))


def _cost_per_rep(records: Sequence[Mapping], phases: tuple[str, ...]) -> dict:
    """(dataset, treatment, model) -> {rep: (duration_s, joules)} summed over phases."""
    out: dict[tuple, dict[int, tuple[float, float]]] = {}
    for rec in records:
        if rec.get("phase") not in phases or rec.get("model") is None:
            continue
        cell = (rec["dataset"], rec["treatment"], rec["model"])
        per_rep = out.setdefault(cell, {})
        rep = int(rec["repetition"])
        d, j = per_rep.get(rep, (0.0, 0.0))
        per_rep[rep] = (d + float(rec["duration_s"]), j + float(rec["joules"]))
    return out


@dataclass(frozen=True)
class DeviationRow:
    """Mean per-repetition train+evaluate cost of one grid cell, and its
    percentage deviation from the benchmark (None on the benchmark itself)."""

    dataset: str
    treatment: str
    model: str
    mean_duration_s: float
    mean_joules: float
    duration_pct: int | None
    joules_pct: int | None
    repetitions: int


@dataclass
class DeviationTable:
    rows: list[DeviationRow]

    def cell(self, dataset: str, treatment: str, model: str) -> DeviationRow:
        for row in self.rows:
            if (row.dataset, row.treatment, row.model) == (dataset, treatment, model):
                return row
        raise KeyError((dataset, treatment, model))


def deviation_table(records: Sequence[Mapping]) -> DeviationTable:
    """Train+evaluate cost per cell and its percent deviation from benchmark.

    Deviations are computed on the repetition means and rounded half away
    from zero to whole percent.
    """
    ok = _ok(records)
    costs = _cost_per_rep(ok, ("train", "evaluate"))
    if not costs:
        raise EmptyLogError("no usable train/evaluate records")
    datasets = _appearance_order(c[0] for c in costs)
    rows: list[DeviationRow] = []
    means: dict[tuple, tuple[float, float, int]] = {}
    for cell, per_rep in costs.items():
        pairs = list(per_rep.values())
        means[cell] = (
            float(np.mean([p[0] for p in pairs])),
            float(np.mean([p[1] for p in pairs])),
            len(pairs),
        )
    for dataset in datasets:
        cells = [c for c in costs if c[0] == dataset]
        treatments = _appearance_order(c[1] for c in cells)
        models = _appearance_order(c[2] for c in cells)
        for model in models:
            if ("benchmark" not in treatments
                    or (dataset, "benchmark", model) not in means):
                raise MissingBenchmarkError(
                    f"no benchmark records for dataset {dataset!r}, model {model!r}"
                )
        for treatment in treatments:
            for model in models:
                if (dataset, treatment, model) not in means:
                    continue
                duration, joules, reps = means[(dataset, treatment, model)]
                if treatment == "benchmark":
                    d_pct = j_pct = None
                else:
                    base_d, base_j, _ = means[(dataset, "benchmark", model)]
                    d_pct = _round_half_away((duration - base_d) / base_d * 100.0)
                    j_pct = _round_half_away((joules - base_j) / base_j * 100.0)
                rows.append(DeviationRow(dataset, treatment, model, duration, joules,
                                         d_pct, j_pct, reps))
    return DeviationTable(rows)


@dataclass(frozen=True)
class AccuracyRow:
    dataset: str
    treatment: str
    model: str
    mean_accuracy: float
    repetitions: int


@dataclass
class AccuracyTable:
    rows: list[AccuracyRow]

    def cell(self, dataset: str, treatment: str, model: str) -> AccuracyRow:
        for row in self.rows:
            if (row.dataset, row.treatment, row.model) == (dataset, treatment, model):
                return row
        raise KeyError((dataset, treatment, model))


def accuracy_table(records: Sequence[Mapping]) -> AccuracyTable:
    """Mean held-out accuracy per (dataset, treatment, model)."""
    ok = [r for r in _ok(records)
          if r.get("phase") == "evaluate" and r.get("accuracy") is not None]
    if not ok:
        raise EmptyLogError("no usable evaluate records")
    grouped: dict[tuple, list[float]] = {}
    for rec in ok:
        grouped.setdefault((rec["dataset"], rec["treatment"], rec["model"]), []).append(
            float(rec["accuracy"])
        )
    rows = [
        AccuracyRow(d, t, m, float(np.mean(vals)), len(vals))
        for (d, t, m), vals in grouped.items()
    ]
    return AccuracyTable(rows)


@dataclass(frozen=True)
class SuppressionRow:
    dataset: str
    k: int
    mean_cell_fraction: float
    mean_suppressed_records: float
    repetitions: int


@dataclass
class SuppressionTable:
    rows: list[SuppressionRow]


def suppression_table(records: Sequence[Mapping]) -> SuppressionTable:
    """Mean suppressed-cell fraction per dataset and k, ascending in k."""
    grouped: dict[tuple, list[tuple[float, int]]] = {}
    for rec in _ok(records):
        detail = rec.get("detail") or {}
        if rec.get("phase") != "treat" or "requested_k" not in detail:
            continue
        key = (rec["dataset"], int(detail["requested_k"]))
        grouped.setdefault(key, []).append(
            (float(detail["suppressed_cell_fraction"]), int(detail["suppressed_records"]))
        )
    if not grouped:
        raise EmptyLogError("no anonymization treat records")
    datasets = _appearance_order(k[0] for k in grouped)
    rows = []
    for dataset in datasets:
        for key in sorted((k for k in grouped if k[0] == dataset), key=lambda k: k[1]):
            vals = grouped[key]
            rows.append(SuppressionRow(
                dataset,
                key[1],
                float(np.mean([v[0] for v in vals])),
                float(np.mean([v[1] for v in vals])),
                len(vals),
            ))
    return SuppressionTable(rows)


@dataclass(frozen=True)
class TreatCostRow:
    dataset: str
    treatment: str
    mean_duration_s: float
    mean_joules: float
    repetitions: int


@dataclass
class TreatCostTable:
    rows: list[TreatCostRow]


def treat_cost_table(records: Sequence[Mapping]) -> TreatCostTable:
    """Mean one-off cost of applying each treatment (the treat phase alone)."""
    grouped: dict[tuple, list[tuple[float, float]]] = {}
    for rec in _ok(records):
        if rec.get("phase") != "treat":
            continue
        grouped.setdefault((rec["dataset"], rec["treatment"]), []).append(
            (float(rec["duration_s"]), float(rec["joules"]))
        )
    if not grouped:
        raise EmptyLogError("no treat records")
    rows = [
        TreatCostRow(d, t, float(np.mean([v[0] for v in vals])),
                     float(np.mean([v[1] for v in vals])), len(vals))
        for (d, t), vals in grouped.items()
    ]
    return TreatCostTable(rows)


def utest_matrices(
    records: Sequence[Mapping],
    alternative: Alternative = Alternative.GREATER,
    method: Method = Method.AUTO,
) -> dict[tuple[str, str], PairwiseMatrix]:
    """Per (dataset, model): pairwise treatment tests on per-repetition
    train+evaluate joules.  Entry (i, j) is the p-value that treatment i's
    energy tends larger than treatment j's."""
    ok = _ok(records)
    costs = _cost_per_rep(ok, ("train", "evaluate"))
    if not costs:
        raise EmptyLogError("no usable train/evaluate records")
    pairs = _appearance_order((c[0], c[2]) for c in costs)
    out: dict[tuple[str, str], PairwiseMatrix] = {}
    for dataset, model in pairs:
        groups: dict[str, list[float]] = {}
        for (d, treatment, m), per_rep in costs.items():
            if (d, m) != (dataset, model):
                continue
            groups[treatment] = [per_rep[rep][1] for rep in sorted(per_rep)]
        if len(groups) >= 2:
            out[(dataset, model)] = pairwise_matrix(groups, alternative, method)
    return out


@dataclass
class ReportTables:
    deviation: DeviationTable
    accuracy: AccuracyTable
    utests: dict[tuple[str, str], PairwiseMatrix]
    suppression: SuppressionTable | None
    treat_costs: TreatCostTable


def build_report(records: Sequence[Mapping]) -> ReportTables:
    """Aggregate a run log into every report table at once."""
    if not _ok(records):
        raise EmptyLogError("the run log holds no successful records")
    try:
        suppression = suppression_table(records)
    except EmptyLogError:  # a grid without k-anonymization arms
        suppression = None
    return ReportTables(
        deviation=deviation_table(records),
        accuracy=accuracy_table(records),
        utests=utest_matrices(records),
        suppression=suppression,
        treat_costs=treat_cost_table(records),
    )


# -- rendering ---------------------------------------------------------------------


def _fmt_p(p: float) -> str:
    if np.isnan(p):
        return "-"
    if p < 0.005:
        return "<0.01"
    return f"{p:.2f}"


def _fmt_pct(pct: int | None) -> str:
    if pct is None:
        return "-"
    return f"+{pct}%" if pct > 0 else f"{pct}%"


def _treatment_label(key: str) -> str:
    try:
        return Treatment.parse(key).label
    except ValueError:
        return key


def _markdown_report(tables: ReportTables) -> str:
    lines: list[str] = ["# Benchmark report", ""]
    datasets = _appearance_order(r.dataset for r in tables.deviation.rows)

    lines.append("## Training and scoring cost")
    lines.append("")
    lines.append("Per-repetition train+evaluate means; deviations are relative "
                 "to the benchmark arm of the same model.")
    for dataset in datasets:
        rows = [r for r in tables.deviation.rows if r.dataset == dataset]
        models = _appearance_order(r.model for r in rows)
        treatments = _appearance_order(r.treatment for r in rows)
        header = ["Treatment"]
        for m in models:
            header += [f"{m} time (s)", f"{m} energy (J)"]
        lines.append("")
        lines.append(f"### {dataset}")
        lines.append("")
        lines.append("| " + " | ".join(header) + " |")
        lines.append("|" + "---|" * len(header))
        for treatment in treatments:
            cells = [_treatment_label(treatment)]
            for m in models:
                try:
                    row = tables.deviation.cell(dataset, treatment, m)
                except KeyError:
                    cells += ["-", "-"]
                    continue
                if treatment == "benchmark":
                    cells += [f"{row.mean_duration_s:.2f}", f"{row.mean_joules:.2f}"]
                else:
                    cells += [_fmt_pct(row.duration_pct), _fmt_pct(row.joules_pct)]
            lines.append("| " + " | ".join(cells) + " |")

    lines.append("")
    lines.append("## Pairwise energy comparisons")
    lines.append("")
    lines.append("One-sided Mann-Whitney p-values that the row treatment costs "
                 "more energy than the column treatment.")
    for (dataset, model), matrix in tables.utests.items():
        lines.append("")
        lines.append(f"### {dataset} / {model}")
        lines.append("")
        header = [""] + [_treatment_label(t) for t in matrix.labels]
        lines.append("| " + " | ".join(header) + " |")
        lines.append("|" + "---|" * len(header))
        for i, row_label in enumerate(matrix.labels):
            cells = [_treatment_label(row_label)]
            cells += [_fmt_p(matrix.p[i, j]) for j in range(len(matrix.labels))]
            lines.append("| " + " | ".join(cells) + " |")

    lines.append("")
    lines.append("## Accuracy")
    for dataset in _appearance_order(r.dataset for r in tables.accuracy.rows):
        rows = [r for r in tables.accuracy.rows if r.dataset == dataset]
        models = _appearance_order(r.model for r in rows)
        treatments = _appearance_order(r.treatment for r in rows)
        lines.append("")
        lines.append(f"### {dataset}")
        lines.append("")
        lines.append("| Treatment | " + " | ".join(models) + " |")
        lines.append("|" + "---|" * (len(models) + 1))
        for treatment in treatments:
            cells = [_treatment_label(treatment)]
            for m in models:
                try:
                    cells.append(f"{tables.accuracy.cell(dataset, treatment, m).mean_accuracy:.3f}")
                except KeyError:
                    cells.append("-")
            lines.append("| " + " | ".join(cells) + " |")

    if tables.suppression is not None:
        lines.append("")
        lines.append("## Suppression")
        lines.append("")
        lines.append("| Dataset | k | Suppressed cells | Suppressed records (mean) |")
        lines.append("|---|---|---|---|")
        for row in tables.suppression.rows:
            lines.append(
                f"| {row.dataset} | {row.k} | {row.mean_cell_fraction * 100:.1f}% "
                f"| {row.mean_suppressed_records:.1f} |"
            )

    lines.append("")
    lines.append("## Treatment cost")
    lines.append("")
    lines.append("| Dataset | Treatment | Time (s) | Energy (J) |")
    lines.append("|---|---|---|---|")
    for row in tables.treat_costs.rows:
        lines.append(
            f"| {row.dataset} | {_treatment_label(row.treatment)} "
            f"| {row.mean_duration_s:.2f} | {row.mean_joules:.2f} |"
        )
    lines.append("")
    return "\n".join(lines)


def _tables_as_json(tables: ReportTables) -> dict:
    return {
        "deviation": [dataclasses.asdict(r) for r in tables.deviation.rows],
        "accuracy": [dataclasses.asdict(r) for r in tables.accuracy.rows],
        "utests": [
            {
                "dataset": dataset,
                "model": model,
                "treatments": list(matrix.labels),
                "p": [[None if np.isnan(v) else v for v in row] for row in matrix.p.tolist()],
            }
            for (dataset, model), matrix in tables.utests.items()
        ],
        "suppression": None if tables.suppression is None
        else [dataclasses.asdict(r) for r in tables.suppression.rows],
        "treat_costs": [dataclasses.asdict(r) for r in tables.treat_costs.rows],
    }


def _csv_lines(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    out = [",".join(header)]
    for row in rows:
        out.append(",".join("" if v is None else str(v) for v in row))
    return "\n".join(out) + "\n"


def render(tables: ReportTables, fmt: str = "markdown", out_dir=".") -> list[Path]:
    """Write the report tables to ``out_dir`` and return the written paths.

    ``fmt`` is ``markdown`` (one report.md), ``json`` (one report.json), or
    ``csv`` (one file per table).  Output is deterministic for a given log.
    """
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        if fmt == "markdown":
            path = out_dir / "report.md"
            path.write_text(_markdown_report(tables), encoding="utf-8")
            return [path]
        if fmt == "json":
            path = out_dir / "report.json"
            path.write_text(
                json.dumps(_tables_as_json(tables), indent=2, sort_keys=True) + "\n",
                encoding="utf-8",
            )
            return [path]
        if fmt == "csv":
            paths = []
            payload = {
                "deviation.csv": _csv_lines(
                    ("dataset", "treatment", "model", "mean_duration_s", "mean_joules",
                     "duration_pct", "joules_pct", "repetitions"),
                    [(r.dataset, r.treatment, r.model, f"{r.mean_duration_s:.6f}",
                      f"{r.mean_joules:.6f}", r.duration_pct, r.joules_pct, r.repetitions)
                     for r in tables.deviation.rows],
                ),
                "accuracy.csv": _csv_lines(
                    ("dataset", "treatment", "model", "mean_accuracy", "repetitions"),
                    [(r.dataset, r.treatment, r.model, f"{r.mean_accuracy:.6f}", r.repetitions)
                     for r in tables.accuracy.rows],
                ),
                "utests.csv": _csv_lines(
                    ("dataset", "model", "row_treatment", "col_treatment", "p"),
                    [
                        (dataset, model, matrix.labels[i], matrix.labels[j],
                         format(matrix.p[i, j], ".9g"))
                        for (dataset, model), matrix in tables.utests.items()
                        for i in range(len(matrix.labels))
                        for j in range(len(matrix.labels))
                        if i != j
                    ],
                ),
                "treat_costs.csv": _csv_lines(
                    ("dataset", "treatment", "mean_duration_s", "mean_joules", "repetitions"),
                    [(r.dataset, r.treatment, f"{r.mean_duration_s:.6f}",
                      f"{r.mean_joules:.6f}", r.repetitions)
                     for r in tables.treat_costs.rows],
                ),
            }
            if tables.suppression is not None:
                payload["suppression.csv"] = _csv_lines(
                    ("dataset", "k", "mean_cell_fraction", "mean_suppressed_records",
                     "repetitions"),
                    [(r.dataset, r.k, f"{r.mean_cell_fraction:.6f}",
                      f"{r.mean_suppressed_records:.2f}", r.repetitions)
                     for r in tables.suppression.rows],
                )
            for name in sorted(payload):
                path = out_dir / name
                path.write_text(payload[name], encoding="utf-8")
                paths.append(path)
            return paths
        raise ValueError(f"unknown report format {fmt!r}")
    except OSError as exc:
        raise ReportIoError(f"writing report to {out_dir} failed: {exc}") from exc
