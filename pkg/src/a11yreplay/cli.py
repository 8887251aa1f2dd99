"""Command-line entry point.

    a11yreplay run --app apps/ --tests tests/ --backend scripted:scripts/ --out runs/
    a11yreplay check-heuristics --mode dynamic-type --before a.png --after b.png --manifest m.json --out out/

The model API token for the http backend is read from the environment
(``A11YREPLAY_API_KEY`` by default), never from the command line.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from .agents import HTTPClient, LLMClient, ScriptedClient
from .agents.llm import DEFAULT_API_KEY_ENV
from .device_sim import AppLoadError, AppModel, load_app
from .heuristics import HeuristicConfig, button_shapes_check, dynamic_type_check
from .imaging import PatchError, load_png, save_png
from .report import SCHEMA_VERSION, BoxOverlay, ExportError, annotate_frame, export_report
from .runner import Job, RunnerConfig, SessionRecording, SpecError, TestSpec, parse_instructions, run_batch
from .ui_model import ScreenSnapshot

log = logging.getLogger(__name__)


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    app_paths: list[Path]
    test_paths: list[Path]
    backend: str
    out_dir: Path
    heuristics: HeuristicConfig = field(default_factory=HeuristicConfig)
    parallel: int = 1
    seed: int = 0
    max_actions: int | None = None
    max_replans: int | None = None
    model: str = "gpt-4"
    api_key_env: str = DEFAULT_API_KEY_ENV

    def __post_init__(self) -> None:
        if self.parallel < 1:
            raise UsageError("--parallel must be at least 1")
        kind, _, target = self.backend.partition(":")
        if kind not in ("scripted", "http") or not target:
            raise UsageError("--backend must be scripted:<path> or http:<url>")

    @property
    def backend_kind(self) -> str:
        return self.backend.partition(":")[0]

    @property
    def backend_target(self) -> str:
        return self.backend.partition(":")[2]


def _expand(paths: Sequence[Path], suffix: str, what: str) -> list[Path]:
    out = []
    for p in paths:
        if p.is_dir():
            found = sorted(q for q in p.iterdir() if q.suffix == suffix)
            if not found:
                raise UsageError(f"no {what} ({suffix}) files in {p}")
            out.extend(found)
        elif p.is_file():
            out.append(p)
        else:
            raise UsageError(f"{what} not found: {p}")
    return out


def _load_apps(paths: list[Path]) -> list[AppModel]:
    apps = []
    for p in _expand(paths, ".json", "app definition"):
        try:
            apps.append(load_app(p))
        except AppLoadError as exc:
            raise UsageError(str(exc)) from None
    return apps


def _pick_app(spec: TestSpec, apps: list[AppModel]) -> AppModel:
    wanted = spec.app_name.strip().lower()
    for app in apps:
        if wanted in (app.name.lower(), app.app_id.lower()):
            return app
    raise UsageError(f"no app definition named {spec.app_name!r}")


def _client_factory(cfg: RunConfig, test_path: Path) -> Callable[[], LLMClient]:
    target = cfg.backend_target
    if cfg.backend_kind == "http":
        return lambda: HTTPClient(target, cfg.model, api_key_env=cfg.api_key_env)
    script = Path(target)
    if script.is_dir():
        script = script / f"{test_path.stem}.json"
    if not script.is_file():
        raise UsageError(f"scripted backend file not found: {script}")
    try:
        ScriptedClient.from_file(script)
    except (ValueError, KeyError) as exc:
        raise UsageError(f"bad script {script}: {exc}") from None
    return lambda: ScriptedClient.from_file(script)


def cmd_run(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    apps = _load_apps(cfg.app_paths)
    tests = _expand(cfg.test_paths, ".txt", "test instructions")
    runner_cfg = RunnerConfig(heuristics=cfg.heuristics)
    if cfg.max_actions is not None:
        runner_cfg = RunnerConfig(max_actions=cfg.max_actions, heuristics=cfg.heuristics)
    if cfg.max_replans is not None:
        runner_cfg = RunnerConfig(
            max_actions=runner_cfg.max_actions, max_replans=cfg.max_replans, heuristics=cfg.heuristics
        )
    jobs, names = [], []
    default_app = apps[0].name if len(apps) == 1 else None
    for path in tests:
        try:
            spec = parse_instructions(path.read_text(), default_app=default_app)
        except SpecError as exc:
            raise UsageError(f"{path}: {exc}") from None
        jobs.append(Job(spec, _pick_app(spec, apps), _client_factory(cfg, path), runner_cfg, cfg.seed))
        names.append(path.stem)
    if len(set(names)) != len(names):
        raise UsageError("test file names must be unique; they name the output directories")

    rows: list[tuple[str, str, str, str, str]] = [("", "", "", "", "")] * len(jobs)

    def export(i: int, rec: SessionRecording | BaseException) -> None:
        dest = cfg.out_dir / names[i]
        if isinstance(rec, BaseException):
            rows[i] = (names[i], "error", "-", "-", str(rec))
            return
        try:
            report = export_report(rec, dest)
        except ExportError as exc:
            rows[i] = (names[i], "error", "-", "-", str(exc))
            return
        rows[i] = (names[i], report.status.value, str(len(report.findings)), str(report.fail_count), str(dest))

    run_batch(jobs, cfg.parallel, on_done=export)
    header = ("test", "status", "findings", "issues", "output")
    widths = [max(len(r[k]) for r in rows + [header]) for k in range(5)]
    for r in [header] + rows:
        print("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip(), file=out)
    return 1 if any(r[1] == "error" for r in rows) else 0


# ------------------------------------------------------------ heuristics


def _read_manifest(path: Path | None) -> dict:
    if path is None:
        raise UsageError("--manifest is required")
    try:
        return json.loads(path.read_text())
    except OSError as exc:
        raise UsageError(f"cannot read manifest {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"manifest {path} is not valid JSON: {exc}") from None


def _snapshot(doc: dict, key: str, mode: str) -> ScreenSnapshot:
    if key not in doc:
        raise UsageError(f"{mode} manifest needs a {key!r} screen")
    try:
        return ScreenSnapshot.from_dict(doc[key])
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"bad {key!r} screen in manifest: {exc}") from None


def _image(path: Path | None, flag: str):
    if path is None:
        raise UsageError(f"{flag} is required for this mode")
    try:
        return load_png(path)
    except OSError as exc:
        raise UsageError(f"cannot read image {path}: {exc}") from None


def cmd_check_heuristics(args: argparse.Namespace, cfg: HeuristicConfig, out=None) -> int:
    out = out or sys.stdout
    manifest = _read_manifest(args.manifest)
    out_dir: Path = args.out
    if args.mode == "dynamic-type":
        before, after = _snapshot(manifest, "before", args.mode), _snapshot(manifest, "after", args.mode)
        _image(args.before, "--before")
        frame = _image(args.after, "--after")
        findings = dynamic_type_check(before, after, cfg)
        name = "after_annotated.png"
    else:
        screen = _snapshot(manifest, "screen", args.mode)
        frame = _image(args.image, "--image")
        if (frame.width, frame.height) != (screen.width, screen.height):
            raise UsageError("image size does not match the manifest screen size")
        try:
            findings = button_shapes_check(screen, frame, cfg)
        except PatchError as exc:
            raise UsageError(str(exc)) from None
        name = "annotated.png"
    out_dir.mkdir(parents=True, exist_ok=True)
    doc = {"schema_version": SCHEMA_VERSION, "findings": [f.to_dict() for f in findings]}
    (out_dir / "findings.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    save_png(annotate_frame(frame, [BoxOverlay(f.region, f.color_role) for f in findings]), out_dir / name)
    fails = sum(f.failed for f in findings)
    print(f"{len(findings)} findings, {fails} failing; written to {out_dir}", file=out)
    return 0


# ---------------------------------------------------------------- parser


def _fraction(text: str) -> float:
    value = float(text)
    if not 0 < value <= 1:
        raise argparse.ArgumentTypeError("must be in (0, 1]")
    return value


def _add_threshold_flags(p: argparse.ArgumentParser) -> None:
    d = HeuristicConfig()
    p.add_argument("--growth-min", type=_fraction, default=d.growth_min, help="minimum area growth between text sizes")
    p.add_argument("--similarity-min", type=_fraction, default=d.partial_similarity_min, help="text matching floor")
    p.add_argument("--underline-span-min", type=_fraction, default=d.underline_span_min, help="underline width fraction")
    p.add_argument("--canny-low", type=float, default=d.canny_low)
    p.add_argument("--canny-high", type=float, default=d.canny_high)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="a11yreplay", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="replay test instructions and export recordings")
    run.add_argument("--app", type=Path, action="append", required=True, help="app definition file or directory")
    run.add_argument("--tests", type=Path, nargs="+", required=True, help="instruction files or directories")
    run.add_argument("--backend", required=True, help="scripted:<file-or-dir> or http:<base-url>")
    run.add_argument("--out", type=Path, required=True)
    run.add_argument("--parallel", type=int, default=1)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--max-actions", type=int)
    run.add_argument("--max-replans", type=int)
    run.add_argument("--model", default="gpt-4")
    run.add_argument("--api-key-env", default=DEFAULT_API_KEY_ENV, help="environment variable holding the API token")
    _add_threshold_flags(run)

    chk = sub.add_parser("check-heuristics", help="run one heuristic on supplied screenshots")
    chk.add_argument("--mode", choices=("dynamic-type", "button-shapes"), required=True)
    chk.add_argument("--before", type=Path, help="screenshot at the smaller text size")
    chk.add_argument("--after", type=Path, help="screenshot at the larger text size")
    chk.add_argument("--image", type=Path, help="screenshot with Button Shapes on")
    chk.add_argument("--manifest", type=Path, help="JSON element manifest")
    chk.add_argument("--out", type=Path, required=True)
    _add_threshold_flags(chk)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        heur = HeuristicConfig(
            partial_similarity_min=args.similarity_min,
            growth_min=args.growth_min,
            underline_span_min=args.underline_span_min,
            canny_low=args.canny_low,
            canny_high=args.canny_high,
        )
        if args.command == "run":
            cfg = RunConfig(
                app_paths=args.app,
                test_paths=args.tests,
                backend=args.backend,
                out_dir=args.out,
                heuristics=heur,
                parallel=args.parallel,
                seed=args.seed,
                max_actions=args.max_actions,
                max_replans=args.max_replans,
                model=args.model,
                api_key_env=args.api_key_env,
            )
            return cmd_run(cfg)
        return cmd_check_heuristics(args, heur)
    except UsageError as exc:
        parser.error(str(exc))  # exits with status 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
