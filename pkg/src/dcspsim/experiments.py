"""Experiment harness: configs in, CSVs and run manifests out.

A suite is a set of cells (one generator configuration each); every cell
runs ``instances x value_seeds`` seed pairs under each requested protocol,
so paired statistics always compare identical (instance, initial values)
pairs.  The manifest records one line per trial
(``suite cell protocol instance_seed value_seed``) and is sufficient to
reproduce any emitted row bit-exactly.
"""
from __future__ import annotations

import concurrent.futures
import configparser
import re
import zlib
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .csp import CspInstance
from .generators import Family, GeneratorConfig, SensorFieldConfig
from .metrics import CSV_HEADER, BatchSummary, paired_t_test, pct_central, pct_links, summarize
from .sim import TrialResult, Verdict, draw_initial_values, run_trial

TRIALS_HEADER = (
    "suite,cell,protocol,instance_seed,value_seed,verdict,cycles,messages,"
    "bytes,work,sessions,links_pct,central_pct"
)

PRESETS = (
    "sat-coloring-desk",
    "random-coloring-desk",
    "runtime-coloring-desk",
    "tracking-desk",
)


@dataclass(frozen=True)
class Cell:
    token: str
    generator: GeneratorConfig

    @property
    def family(self) -> str:
        return self.generator.family.value

    @property
    def n(self) -> int:
        if self.generator.family is Family.SENSOR:
            return self.generator.sensor.targets  # type: ignore[union-attr]
        return self.generator.n

    @property
    def density(self) -> float | None:
        if self.generator.family is Family.SENSOR:
            return None
        return self.generator.density

    @property
    def targets(self) -> int | None:
        if self.generator.family is Family.SENSOR:
            return self.generator.sensor.targets  # type: ignore[union-attr]
        return None


@dataclass
class ExperimentConfig:
    name: str
    protocols: tuple[str, ...]
    cycle_limit: int
    seed: int
    cells: list[Cell]
    instances: dict[str, int]
    value_seeds: dict[str, int]

    def trial_specs(self) -> list[tuple[str, str, int, int]]:
        """(cell_token, protocol, instance_seed, value_seed) for every trial,
        in deterministic order."""
        specs = []
        for cell in self.cells:
            tok = cell.token
            for i in range(self.instances[tok]):
                iseed = derive_seed(self.seed, tok, "inst", i)
                for j in range(self.value_seeds[tok]):
                    vseed = derive_seed(self.seed, tok, "val", i, j)
                    for proto in self.protocols:
                        specs.append((tok, proto, iseed, vseed))
        return specs


def derive_seed(base: int, *parts) -> int:
    text = f"{base}|" + "|".join(str(p) for p in parts)
    return zlib.crc32(text.encode())


# -- cell tokens ---------------------------------------------------------------


def _fmt(x: float) -> str:
    return f"{x:g}"


def cell_token(gen: GeneratorConfig) -> str:
    if gen.family is Family.SENSOR:
        s = gen.sensor
        assert s is not None
        return (f"sensor-t{s.targets}-g{s.rows}x{s.cols}"
                f"-r{_fmt(s.sense_range)}-f{_fmt(s.width)}x{_fmt(s.height)}")
    return f"{gen.family.value}-n{gen.n}-d{_fmt(gen.density)}-k{gen.k}"


_COLOR_RE = re.compile(r"^(minton|random)-n(\d+)-d([0-9.]+)-k(\d+)$")
_SENSOR_RE = re.compile(
    r"^sensor-t(\d+)-g(\d+)x(\d+)-r([0-9.]+)-f([0-9.]+)x([0-9.]+)$"
)


def parse_cell_token(token: str) -> GeneratorConfig:
    m = _COLOR_RE.match(token)
    if m:
        family = Family(m.group(1))
        return GeneratorConfig(family, n=int(m.group(2)),
                               density=float(m.group(3)), k=int(m.group(4)))
    m = _SENSOR_RE.match(token)
    if m:
        cfg = SensorFieldConfig(
            targets=int(m.group(1)), rows=int(m.group(2)), cols=int(m.group(3)),
            sense_range=float(m.group(4)), width=float(m.group(5)),
            height=float(m.group(6)),
        )
        return GeneratorConfig(Family.SENSOR, sensor=cfg)
    raise ValueError(f"unparseable cell token {token!r}")


# -- config files ----------------------------------------------------------------


class ConfigError(ValueError):
    pass


def load_config(path: str | Path) -> ExperimentConfig:
    parser = configparser.ConfigParser()
    read = parser.read(str(path))
    if not read:
        raise ConfigError(f"config file {path} not found")
    return _config_from_parser(parser)


def load_preset(name: str) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown suite {name!r}; presets: {', '.join(PRESETS)}")
    text = resources.files("dcspsim.presets").joinpath(f"{name}.ini").read_text()
    parser = configparser.ConfigParser()
    parser.read_string(text)
    return _config_from_parser(parser)


def _require(section, key: str, where: str) -> str:
    if key not in section:
        raise ConfigError(f"missing key {where}.{key}")
    return section[key]


def _config_from_parser(parser: configparser.ConfigParser) -> ExperimentConfig:
    if "suite" not in parser:
        raise ConfigError("missing [suite] section")
    suite = parser["suite"]
    protocols = tuple(_require(suite, "protocols", "suite").split())
    if not protocols:
        raise ConfigError("suite.protocols is empty")
    for p in protocols:
        if p not in ("apo", "awc"):
            raise ConfigError(f"suite.protocols: unknown protocol {p!r}")
    config = ExperimentConfig(
        name=_require(suite, "name", "suite"),
        protocols=protocols,
        cycle_limit=int(suite.get("cycle_limit", "1000")),
        seed=int(suite.get("seed", "0")),
        cells=[],
        instances={},
        value_seeds={},
    )
    for section in parser.sections():
        if section == "suite":
            continue
        sec = parser[section]
        instances = int(sec.get("instances", "1"))
        value_seeds = int(sec.get("value_seeds", "1"))
        if section in ("minton", "random"):
            family = Family(section)
            ns = [int(x) for x in _require(sec, "n", section).split()]
            ds = [float(x) for x in _require(sec, "density", section).split()]
            k = int(sec.get("k", "3"))
            gens = [GeneratorConfig(family, n=n, density=d, k=k)
                    for n in ns for d in ds]
        elif section == "sensor":
            targets = [int(x) for x in _require(sec, "targets", section).split()]
            gens = [
                GeneratorConfig(Family.SENSOR, sensor=SensorFieldConfig(
                    targets=t,
                    rows=int(sec.get("rows", "14")),
                    cols=int(sec.get("cols", "16")),
                    sense_range=float(sec.get("range", "25")),
                    width=float(sec.get("width", "200")),
                    height=float(sec.get("height", "200")),
                ))
                for t in targets
            ]
        else:
            raise ConfigError(f"unknown section [{section}]")
        for gen in gens:
            tok = cell_token(gen)
            config.cells.append(Cell(tok, gen))
            config.instances[tok] = instances
            config.value_seeds[tok] = value_seeds
    if not config.cells:
        raise ConfigError("config defines no cells")
    return config


# -- execution ---------------------------------------------------------------------


def _run_spec(args) -> tuple[TrialResult, list[str] | None]:
    token, protocol, iseed, vseed, cycle_limit, strict, want_trace = args
    instance = parse_cell_token(token).build(iseed)
    values = draw_initial_values(instance, vseed)
    trace: list[str] | None = [] if want_trace else None
    result = run_trial(instance, protocol, values, cycle_limit,
                       assert_invariants=strict, trace=trace)
    return result, trace


@dataclass
class SuiteResult:
    config: ExperimentConfig
    trials: dict[tuple[str, str, int, int], TrialResult] = field(default_factory=dict)

    def cell_trials(self, token: str, protocol: str) -> list[TrialResult]:
        return [r for (tok, proto, _, _), r in self.trials.items()
                if tok == token and proto == protocol]

    def paired(self, token: str, metric) -> tuple[list[float], list[float]]:
        """(apo, awc) metric values paired by (instance_seed, value_seed)."""
        apo = {(i, v): metric(r) for (tok, p, i, v), r in self.trials.items()
               if tok == token and p == "apo"}
        awc = {(i, v): metric(r) for (tok, p, i, v), r in self.trials.items()
               if tok == token and p == "awc"}
        keys = sorted(set(apo) & set(awc))
        return [apo[k] for k in keys], [awc[k] for k in keys]


def run_suite(
    config: ExperimentConfig,
    out_dir: str | Path,
    jobs: int = 1,
    trace: bool = False,
    assert_invariants: bool = True,
    cycle_limit: int | None = None,
    figures: bool = True,
) -> SuiteResult:
    """Execute every cell, write metrics CSVs, per-trial CSV, manifest and
    (optionally) figures.  Byte-identical outputs under identical config."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    limit = config.cycle_limit if cycle_limit is None else cycle_limit
    specs = config.trial_specs()
    args = [(tok, proto, i, v, limit, assert_invariants, trace)
            for tok, proto, i, v in specs]
    if jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_run_spec, args, chunksize=8))
    else:
        outcomes = [_run_spec(a) for a in args]
    results = [r for r, _ in outcomes]
    suite = SuiteResult(config)
    for spec, result in zip(specs, results):
        suite.trials[spec] = result

    _write_manifest(out / "manifest.txt", config, specs, limit)
    _write_trials(out / "trials.csv", config, specs, results)
    summaries = build_summaries(suite, censor_cycles=False)
    _write_cells(out / "cells.csv", summaries)
    _write_cells(out / "cells_censored.csv", build_summaries(suite, censor_cycles=True))
    if trace:
        (out / "traces").mkdir(exist_ok=True)
        for idx, (spec, (_, lines)) in enumerate(zip(specs, outcomes)):
            tok, proto, _, _ = spec
            assert lines is not None
            (out / "traces" / f"{idx:05d}_{tok}_{proto}.log").write_text(
                "\n".join(lines) + ("\n" if lines else ""))
    if figures:
        from .figures import render_figures

        render_figures(out / "cells.csv", out / "figures")
    return suite


def build_summaries(suite: SuiteResult, censor_cycles: bool) -> list[BatchSummary]:
    config = suite.config
    rows: list[BatchSummary] = []
    for cell in config.cells:
        p_value = None
        if {"apo", "awc"} <= set(config.protocols):
            apo, awc = suite.paired(cell.token, lambda r: float(r.cycles))
            if len(apo) >= 2:
                p_value = paired_t_test(apo, awc)
        for proto in config.protocols:
            batch = suite.cell_trials(cell.token, proto)
            if not batch:
                continue
            summary = summarize(
                batch, proto, cell.family, cell.n, cell.density, cell.targets,
                censor_cycles=censor_cycles,
            )
            summary.p_value = p_value
            rows.append(summary)
    return rows


def _write_manifest(path: Path, config: ExperimentConfig, specs, limit: int) -> None:
    lines = [f"# cycle_limit={limit}"]
    lines += [f"{config.name} {tok} {proto} {iseed} {vseed}"
              for tok, proto, iseed, vseed in specs]
    path.write_text("\n".join(lines) + "\n")


def _write_trials(path: Path, config, specs, results) -> None:
    lines = [TRIALS_HEADER]
    for (tok, proto, iseed, vseed), r in zip(specs, results):
        lines.append(
            f"{config.name},{tok},{proto},{iseed},{vseed},{r.verdict.value},"
            f"{r.cycles},{r.messages_total},{r.bytes_total},{r.work_total},"
            f"{r.sessions},{pct_links(r):.4f},{pct_central(r):.4f}"
        )
    path.write_text("\n".join(lines) + "\n")


def _write_cells(path: Path, summaries: list[BatchSummary]) -> None:
    lines = [CSV_HEADER] + [s.csv_row() for s in summaries]
    path.write_text("\n".join(lines) + "\n")


# -- replay -------------------------------------------------------------------------


def replay(
    manifest_path: str | Path,
    cell: str,
    index: int,
    protocol: str | None = None,
    cycle_limit: int | None = None,
    assert_invariants: bool = True,
) -> tuple[TrialResult, list[str]]:
    """Re-execute one manifest trial with a full message trace."""
    lines = Path(manifest_path).read_text().splitlines()
    matching = []
    for ln in lines:
        if ln.startswith("#"):
            m = re.match(r"#\s*cycle_limit=(\d+)", ln)
            if m and cycle_limit is None:
                cycle_limit = int(m.group(1))
            continue
        parts = ln.split()
        if len(parts) != 5:
            raise ValueError(f"bad manifest line: {ln!r}")
        _, tok, proto, iseed, vseed = parts
        if tok == cell and (protocol is None or proto == protocol):
            matching.append((tok, proto, int(iseed), int(vseed)))
    if not 0 <= index < len(matching):
        raise ValueError(
            f"trial index {index} out of range; {len(matching)} trials match "
            f"cell {cell!r}"
        )
    tok, proto, iseed, vseed = matching[index]
    instance = parse_cell_token(tok).build(iseed)
    values = draw_initial_values(instance, vseed)
    trace: list[str] = []
    result = run_trial(instance, proto, values, cycle_limit or 1000,
                       assert_invariants=assert_invariants, trace=trace)
    return result, trace
