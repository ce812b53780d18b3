from __future__ import annotations

import datetime
import logging
import os
import sys
import typing as t
from pathlib import Path

from werkzeug.datastructures import ImmutableDict
from werkzeug.utils import cached_property

from .config import Config
from .ctx import LabContext
from .errors import ConfigError, Error, InvariantViolation
from .events import LabEvents
from .experiment import ExperimentConfig, ExperimentResult, experiment
from .helpers import config_hash, get_debug_flag
from .json.provider import DefaultJSONProvider, JSONProvider
from .ledger import CsvLedger, parameter_echo, write_plot_data
from .logging import RunLog, capture_run_log, create_logger, log_level
from .template import Template
from .version import __version__


class Lab(object):
    """Runs registered experiments: strict config parsing, a lab context
    around the numerical work, CSV ledger, plot data and a text summary.

    ::

        lab = Lab()
        lab.run(lab.load_config("discrete.json"), "out/discrete")
    """

    config_class = Config

    json_provider_class: type[JSONProvider] = DefaultJSONProvider

    template_class = Template

    default_config = ImmutableDict({
        'DEBUG': None,
        'THREADS': 1,
        'FLOAT_FORMAT': '.12g',
        'PROPAGATE_EXCEPTIONS': None,
        'LEDGER_NAME': 'results.csv',
        'LOG_LEVEL': 'INFO',
        'RUN_LOG': 'run.log',
        'SUMMARY_TEMPLATE': 'summary.txt.j2',
    })

    def __init__(self, import_name: str = "restriction_lab", threads: int | None = None,
                 config: t.Mapping[str, t.Any] | None = None):
        self.import_name = import_name
        self.config = self.make_config()
        if config:
            self.config.update_strict(config)
        if threads is not None:
            if threads < 1:
                raise ConfigError(f"--threads must be >= 1, got {threads}")
            self.config["THREADS"] = threads
        log_level(self)

        self.json = self.json_provider_class(self)
        self.template = self.template_class()
        self.events = LabEvents()

    @cached_property
    def name(self) -> str:
        if self.import_name == "__main__":
            fn: str | None = getattr(sys.modules["__main__"], "__file__", None)
            if fn is None:
                return "__main__"
            return os.path.splitext(os.path.basename(fn))[0]
        return self.import_name

    @property
    def debug(self) -> bool:
        return bool(self.config["DEBUG"])

    @cached_property
    def logger(self) -> logging.Logger:
        return create_logger(self)

    def make_config(self) -> Config:
        defaults = dict(self.default_config)
        defaults['DEBUG'] = get_debug_flag()
        return self.config_class(defaults)

    def lab_context(self) -> LabContext:
        return LabContext(self)

    def do_teardown_run(self, exc: BaseException | None = None) -> None:
        for fn in reversed(self.events.teardown_run):
            fn(exc)

    def load_config(self, path: str | os.PathLike[str]) -> ExperimentConfig:
        try:
            with open(path, encoding="utf-8") as fp:
                data = self.json.load(fp)
        except OSError as e:
            raise ConfigError(f"cannot read config {os.fspath(path)}: {e.strerror}") from e
        except ValueError as e:
            raise ConfigError(f"config {os.fspath(path)} is not valid JSON: {e}") from e
        return ExperimentConfig.from_mapping(data)

    def resolve(self, config: ExperimentConfig) -> tuple[experiment, dict[str, t.Any], str]:
        """Registered experiment, merged config and its hash; nothing is written."""
        runner = experiment.find(config.experiment)
        merged = runner.resolve(config)
        return runner, merged, config_hash(self.json.canonical(merged))

    def run(self, config: ExperimentConfig, out: str | os.PathLike[str]) -> ExperimentResult:
        """Run one experiment and write its artifacts to ``out``.

        Raises :class:`InvariantViolation` after the artifacts are written
        when any verification criterion failed.
        """
        runner, merged, digest = self.resolve(config)
        started = datetime.datetime.now(datetime.timezone.utc)
        with capture_run_log(self.logger) as run_log:
            self.logger.info(f"running {runner.name} (config {digest[:12]})")

            with self.lab_context():
                self.events.fire_pre_run(merged)
                try:
                    result = runner.fn(merged["parameters"], merged["seed"])
                except Exception as e:
                    self.events.fire_post_run(merged, None, e)
                    raise
                self.events.fire_post_run(merged, result, None)

            self.logger.info(f"{runner.name}: {result.status}")
        self.write_artifacts(Path(out), runner.name, merged, digest, result, started, run_log)

        failures = result.failures
        if failures:
            raise InvariantViolation(failures[0].criterion, failures[0].detail)
        return result

    def write_artifacts(self, out: Path, name: str, merged: dict[str, t.Any], digest: str,
                        result: ExperimentResult, started: datetime.datetime,
                        run_log: RunLog | None = None) -> list[str]:
        out.mkdir(parents=True, exist_ok=True)
        float_format = self.config["FLOAT_FORMAT"]

        echo = parameter_echo(merged["parameters"], merged["seed"])
        ledger = CsvLedger(out / self.config["LEDGER_NAME"], name, digest, echo, float_format)
        artifacts = [os.path.basename(ledger.write(result.rows))]

        for table, rows in sorted(result.tables.items()):
            extra = CsvLedger(out / f"{table}.csv", name, digest, echo, float_format)
            artifacts.append(os.path.basename(extra.write(rows)))

        for plot, columns in sorted(result.plots.items()):
            write_plot_data(out / f"{plot}.dat", columns, float_format)
            artifacts.append(f"{plot}.dat")

        run_log_name = self.config["RUN_LOG"]
        if run_log is not None and run_log_name:
            artifacts.append(os.path.basename(run_log.write(out / run_log_name)))

        summary = self.template.render(self.config["SUMMARY_TEMPLATE"], {
            "version": __version__,
            "experiment": name,
            "status": result.status,
            "label": result.label,
            "started": started.isoformat(timespec="seconds"),
            "finished": datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds"),
            "config_hash": digest,
            "seed": merged["seed"],
            "parameters": merged["parameters"],
            "metrics": result.metrics,
            "checks": result.checks,
            "artifacts": artifacts,
        })
        (out / "summary.txt").write_text(summary, encoding="utf-8")
        return artifacts

    def verify(self, out: str | os.PathLike[str], seed: int = 0) -> dict[str, ExperimentResult]:
        """Every acceptance experiment with its built-in parameters, each into
        ``out/<name>``. Raises for the first failed criterion once all ran."""
        results: dict[str, ExperimentResult] = {}
        first: InvariantViolation | None = None

        for name in experiment.names():
            runner = experiment.find(name)
            if not runner.verify:
                continue
            config = ExperimentConfig(name, seed if runner.seeded else None, {})
            try:
                results[name] = self.run(config, Path(out) / name)
            except InvariantViolation as e:
                self.logger.error(f"{name}: {e.message}")
                first = first or e

        if first is not None:
            raise first
        return results

    def handle_exception(self, e: BaseException) -> int:
        """Exit code for ``e``; re-raises when exceptions propagate."""
        propagate = self.config.get("PROPAGATE_EXCEPTIONS")

        if propagate is None:
            propagate = self.debug
        if propagate:
            raise e

        if isinstance(e, Error):
            self.logger.error(e.message, exc_info=e if self.debug else None)
            return e.exit_code

        self.logger.error(f"Unexpected {type(e).__name__}: {e}", exc_info=e)
        return 1
