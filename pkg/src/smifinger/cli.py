"""Command-line driver: ``smifinger {simulate,timedomain,train-eval,spectrogram}``.

Each command takes an optional YAML/JSON config; flags override the file.
Exit codes: 0 success, 2 bad config or input, 3 I/O failure, 4 missing
prerequisite artifact (dataset, manifest, WAV).
"""

from __future__ import annotations

import argparse
import contextlib
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import fileio
from .classifier import CLASSES, save_model
from .config import config_echo, load_config
from .errors import ConfigError, InvalidInputError, MissingArtifactError, SmiFingerError
from .pipeline import (
    SENSORS,
    TABLE_HEADER,
    SensorFeatures,
    SensorTrace,
    drop_snr,
    evaluate_sensors,
    features_of,
    group_rows,
    separations,
    table_rows,
    trial_id,
)
from .scenarios import (
    EVENTS,
    DropScenario,
    EventKind,
    RecipeEntry,
    gen_drop_sequence,
    iter_dataset,
    render_drop,
    drop_scenario_seeds,
    trial_seed,
)
from .spectro import spectrogram_of

log = logging.getLogger("smifinger")

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_MISSING = 0, 2, 3, 4
DATASET_MANIFEST = "manifest.json"
RUN_MANIFEST = "run_manifest.json"
LOCK_NAME = ".smifinger.lock"


class RunRecorder:
    """Collects seeds, digests and timings; writes the run manifest at the end."""

    def __init__(self, command: str, cfg, out_dir: Path):
        self.command = command
        self.cfg = cfg
        self.out_dir = out_dir
        self.seeds: dict = {}
        self.inputs: dict[str, str] = {}
        self.outputs: list[Path] = []
        self.timings: dict[str, float] = {}
        self._t0 = time.perf_counter()

    @contextlib.contextmanager
    def timed(self, name: str):
        t = time.perf_counter()
        yield
        self.timings[name] = round(time.perf_counter() - t, 3)

    def output(self, path) -> Path:
        path = Path(path)
        self.outputs.append(path)
        return path

    def add_input(self, path):
        self.inputs[str(path)] = fileio.sha256_file(path)

    def finish(self):
        self.timings["total"] = round(time.perf_counter() - self._t0, 3)
        manifest = {
            "command": self.command,
            "toolkit_version": __version__,
            "config": config_echo(self.cfg),
            "seeds": self.seeds,
            "inputs": self.inputs,
            "outputs": {
                os.path.relpath(p, self.out_dir): fileio.sha256_file(p) for p in sorted(set(self.outputs))
            },
            "timings_s": self.timings,
        }
        fileio.write_json(self.out_dir / RUN_MANIFEST, manifest)


@contextlib.contextmanager
def output_lock(out_dir: Path):
    """One process per output directory; a stale lock must be removed by hand."""
    lock = out_dir / LOCK_NAME
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise OSError(f"{out_dir} is locked by another run (remove {lock} if stale)") from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(lock)


def _prepare_out(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- simulate ----------------------------------------------------------------


def _recipe_echo(entry: RecipeEntry) -> dict:
    d = entry.disturbance
    return {
        "scenario_id": entry.scenario_id, "labels": list(entry.labels), "count": entry.count,
        "split": entry.split, "group": entry.group,
        "disturbance": {
            "kind": d.kind.value, "spl_db": d.spl_db, "content": d.content, "variant": d.variant,
            "airborne_to_surface_attenuation_db": d.airborne_to_surface_attenuation_db,
        },
    }


def _simulate_shake(cfg, out: Path, rec: RunRecorder) -> dict:
    params = cfg.scene.to_params()
    wrist = cfg.scene.wrist()
    recipe = cfg.recipe.build()
    trials = []
    if cfg.dry_run:
        for entry in recipe:
            for i in range(entry.count):
                tid = trial_id(entry.scenario_id, i)
                trials.append({
                    "id": tid, "scenario_id": entry.scenario_id, "index": i, "label": entry.label_for(i),
                    "split": entry.split, "group": entry.group,
                    "seed": int(trial_seed(cfg.seed, entry.scenario_id, i).generate_state(1)[0]),
                    "smi_wav": None, "mic_wav": None,
                })
    else:
        with rec.timed("generate"):
            for entry, trial in iter_dataset(recipe, cfg.seed, params, wrist):
                tid = trial_id(entry.scenario_id, trial.index)
                smi_name, mic_name = f"{tid}_smi.wav", f"{tid}_mic.wav"
                fileio.write_wav(rec.output(out / smi_name), trial.smi.samples, trial.smi.sample_rate_hz)
                fileio.write_wav(rec.output(out / mic_name), trial.mic.samples, trial.mic.sample_rate_hz)
                trials.append({
                    "id": tid, "scenario_id": entry.scenario_id, "index": trial.index, "label": trial.label,
                    "split": entry.split, "group": entry.group, "seed": trial.seed,
                    "smi_wav": smi_name, "mic_wav": mic_name,
                })
                log.info("trial %s (%s)", tid, trial.label)
    return {"recipe": [_recipe_echo(e) for e in recipe], "trials": trials}


def _simulate_drop(cfg, out: Path, rec: RunRecorder) -> dict:
    params = cfg.scene.to_params()
    scenarios = []
    with rec.timed("generate"):
        for sc in cfg.drop.build():
            gen_ss, render_ss = drop_scenario_seeds(cfg.seed, sc.scenario_id)
            seq = gen_drop_sequence(EVENTS[sc.event], sc.count, sc.anl_db, sc.cup_owner, gen_ss, params)
            item = {
                "id": sc.scenario_id, "event": sc.event.value, "anl_db": sc.anl_db,
                "cup_owner": sc.cup_owner, "count": sc.count,
                "event_times": [round(t, 9) for t in seq.event_times],
                "smi_wav": None, "mic_wav": None,
            }
            if not cfg.dry_run:
                recording = render_drop(seq, params, render_ss)
                item["smi_wav"], item["mic_wav"] = f"{sc.scenario_id}_smi.wav", f"{sc.scenario_id}_mic.wav"
                fileio.write_wav(rec.output(out / item["smi_wav"]), recording.smi.samples,
                                 recording.smi.sample_rate_hz)
                fileio.write_wav(rec.output(out / item["mic_wav"]), recording.mic.samples,
                                 recording.mic.sample_rate_hz)
                log.info("drop scenario %s", sc.scenario_id)
            scenarios.append(item)
    return {"scenarios": scenarios}


def cmd_simulate(cfg) -> int:
    out = _prepare_out(cfg.output_dir)
    with output_lock(out):
        rec = RunRecorder("simulate", cfg, out)
        rec.seeds = {"master": cfg.seed}
        body = _simulate_shake(cfg, out, rec) if cfg.suite == "shake" else _simulate_drop(cfg, out, rec)
        manifest = {
            "format": "smifinger-dataset", "version": 1, "suite": cfg.suite, "seed": cfg.seed,
            "dry_run": cfg.dry_run, "scene": config_echo(cfg.scene), **body,
        }
        fileio.write_json(rec.output(out / DATASET_MANIFEST), manifest)
        rec.finish()
    n = len(body.get("trials", body.get("scenarios", [])))
    print(f"{cfg.suite} dataset: {n} {'planned ' if cfg.dry_run else ''}items in {out}")
    return EXIT_OK


# -- dataset access ----------------------------------------------------------


def load_dataset_manifest(dataset_dir, suite: str) -> tuple[Path, dict]:
    root = Path(dataset_dir)
    path = root / DATASET_MANIFEST
    if not path.is_file():
        raise MissingArtifactError(f"no dataset manifest at {path}")
    manifest = fileio.read_json(path)
    if manifest.get("suite") != suite:
        raise MissingArtifactError(f"{root} holds a {manifest.get('suite')!r} dataset, need {suite!r}")
    if manifest.get("dry_run"):
        raise MissingArtifactError(f"{root} is a dry-run dataset without audio")
    return root, manifest


def _load_trace(root: Path, name, rec: RunRecorder | None = None) -> SensorTrace:
    if not name or not (root / name).is_file():
        raise MissingArtifactError(f"missing WAV {root / str(name)}")
    if rec is not None:
        rec.add_input(root / name)
    samples, rate = fileio.read_wav(root / name)
    return SensorTrace(samples, rate)


# -- timedomain --------------------------------------------------------------


def cmd_timedomain(cfg) -> int:
    root, manifest = load_dataset_manifest(cfg.dataset_dir, "drop")
    out = _prepare_out(cfg.output_dir or root)
    with output_lock(out):
        rec = RunRecorder("timedomain", cfg, out)
        rec.seeds = {"dataset": manifest.get("seed")}
        kwargs = dict(rest_segment_s=cfg.rest_segment_s, peak_window_s=cfg.peak_window_s,
                      threshold_k=cfg.threshold_k, refractory_s=cfg.refractory_s)
        snr_rows, peaks, scenarios = [], {}, []
        with rec.timed("analyze"):
            for item in manifest["scenarios"]:
                sc = DropScenario(item["id"], EventKind(item["event"]), item["anl_db"], item["cup_owner"],
                                  item["count"])
                scenarios.append(sc)
                for sensor, key in (("laser", "smi_wav"), ("mic", "mic_wav")):
                    trace = _load_trace(root, item[key], rec)
                    report, pk, detected, _ = drop_snr(trace, item["event_times"], **kwargs)
                    peaks[(sc.scenario_id, sensor)] = pk
                    snr_rows.append([sc.scenario_id, sensor, sc.anl_db, sc.cup_owner,
                                     round(report.snr_db, 6), round(report.snr_linear, 6),
                                     report.noise.p_noise, report.peaks.count, detected.count])
            seps = separations(scenarios, peaks)
        fileio.write_csv(rec.output(out / "snr.csv"),
                         ["scenario", "sensor", "anl_db", "cup_owner", "snr_db", "snr_linear",
                          "p_noise", "n_peaks", "n_detected"], snr_rows)
        sep_rows = [[sensor, r, p, round(s.margin_db, 6), s.perfectly_separated] for sensor, r, p, s in seps]
        fileio.write_csv(rec.output(out / "separation.csv"),
                         ["sensor", "robot_scenario", "person_scenario", "margin_db", "perfectly_separated"],
                         sep_rows)
        fileio.write_json(rec.output(out / "timedomain.json"), {
            "snr": [dict(zip(["scenario", "sensor", "snr_db"], [r[0], r[1], r[4]])) for r in snr_rows],
            "separation": [{"sensor": s, "robot": r, "person": p, **sep.to_dict()} for s, r, p, sep in seps],
        })
        rec.finish()

    print(f"{'scenario':<22}{'sensor':<8}{'SNR dB':>9}{'peaks':>7}{'detected':>10}")
    for r in snr_rows:
        print(f"{r[0]:<22}{r[1]:<8}{r[4]:>9.1f}{r[7]:>7}{r[8]:>10}")
    for sensor, robot, person, sep in seps:
        flag = "perfect separation" if sep.perfectly_separated else "overlap"
        print(f"{sensor:<6} {robot} vs {person}: margin {sep.margin_db:+.1f} dB ({flag})")
    return EXIT_OK


# -- train-eval --------------------------------------------------------------


def cmd_train_eval(cfg) -> int:
    root, manifest = load_dataset_manifest(cfg.dataset_dir, "shake")
    out = _prepare_out(cfg.output_dir)
    mel = cfg.mel.build()
    with output_lock(out):
        rec = RunRecorder("train-eval", cfg, out)
        rec.seeds = {"classifier": cfg.seed, "dataset": manifest.get("seed")}
        recipe = {e["scenario_id"]: e for e in manifest["recipe"]}
        features = {s: SensorFeatures() for s in SENSORS}
        with rec.timed("features"):
            for t in manifest["trials"]:
                entry = recipe[t["scenario_id"]]
                proxy = RecipeEntry(entry["scenario_id"], tuple(entry["labels"]), entry["count"],
                                    split=entry["split"], group=entry["group"])
                for sensor, key in (("laser", "smi_wav"), ("mic", "mic_wav")):
                    trace = _load_trace(root, t[key], rec)
                    features[sensor].add(proxy, t["label"], features_of(trace.samples, trace.sample_rate_hz, mel))
        if not features["mic"].X_train:
            raise MissingArtifactError(f"{root} has no training trials")
        groups = {}
        for e in manifest["recipe"]:
            if e["split"] == "test" and e["group"] != "none":
                groups.setdefault(e["group"], []).append(e["scenario_id"])
        test_order = [e["scenario_id"] for e in manifest["recipe"] if e["split"] == "test"]
        c = cfg.classifier
        with rec.timed("train"):
            results = evaluate_sensors(features, groups, cfg.seed, k=c.k, epochs=c.epochs, lr=c.lr,
                                       lr_decay=c.lr_decay, batch_size=c.batch_size,
                                       feature_spec={"pooling": "mean+std", "n_mels": mel.n_mels})
        rows = table_rows(results, test_order)
        fileio.write_csv(rec.output(out / "table.csv"), TABLE_HEADER, rows)
        grows = group_rows(results)
        fileio.write_csv(rec.output(out / "groups.csv"), TABLE_HEADER, grows)
        for sensor in SENSORS:
            for gname, rep in results[sensor].groups.items():
                stem = out / f"confusion_{sensor}_{gname}"
                fileio.write_matrix_csv(rec.output(stem.with_suffix(".csv")), rep.confusion, CLASSES, CLASSES)
                fileio.write_png(rec.output(stem.with_suffix(".png")), fileio.confusion_image(rep.confusion))
            if cfg.save_models:
                (out / "models").mkdir(exist_ok=True)
                for i, model in enumerate(results[sensor].models):
                    path = rec.output(out / "models" / f"{sensor}_fold{i}.smfm")
                    save_model(model, path)
        rec.finish()

    print(f"{'experiment':<28}{'mic':>14}{'laser':>14}")
    for name, ma, ms, la, ls in rows + grows:
        print(f"{name:<28}{ma:>8.2f} ± {ms:.2f}{la:>8.2f} ± {ls:.2f}")
    return EXIT_OK


# -- spectrogram -------------------------------------------------------------


def cmd_spectrogram(cfg) -> int:
    if not cfg.input:
        raise ConfigError("spectrogram needs an input WAV")
    samples, rate = fileio.read_wav(cfg.input)
    mel = cfg.mel.build()
    spec = spectrogram_of(samples, rate, mel)
    out = _prepare_out(cfg.output_dir)
    stem = out / f"{Path(cfg.input).stem}_mel{mel.n_mels}"
    with output_lock(out):
        rec = RunRecorder("spectrogram", cfg, out)
        rec.add_input(cfg.input)
        fileio.write_png(rec.output(stem.with_suffix(".png")), fileio.spectrogram_image(spec.values))
        header = ["time_s"] + [f"{c:.1f}" for c in spec.mel_centers_hz]
        fileio.write_csv(rec.output(stem.with_suffix(".csv")), header,
                         np.column_stack([spec.frame_times, spec.values]).tolist())
        rec.finish()
    print(f"{spec.values.shape[0]} frames x {spec.values.shape[1]} mel bins -> {stem}.png")
    return EXIT_OK


# -- argument parsing --------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="smifinger", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a shake or drop dataset")
    p.add_argument("--config", help="YAML/JSON config file")
    p.add_argument("--suite", choices=["shake", "drop"])
    p.add_argument("--seed", type=int)
    p.add_argument("-o", "--output", dest="output_dir")
    p.add_argument("--dry-run", action="store_const", const=True, default=None,
                   help="write the manifest only, no audio")
    p.add_argument("--train-per-class", type=int)
    p.add_argument("--test-per-set", type=int)
    p.add_argument("--wrist-speed", type=float, help="wrist speed in rad/s")

    p = sub.add_parser("timedomain", help="SNR and separation report for a drop dataset")
    p.add_argument("--config")
    p.add_argument("--dataset", dest="dataset_dir")
    p.add_argument("-o", "--output", dest="output_dir")

    p = sub.add_parser("train-eval", help="cross-validated classification of a shake dataset")
    p.add_argument("--config")
    p.add_argument("--dataset", dest="dataset_dir")
    p.add_argument("-o", "--output", dest="output_dir")
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--folds", type=int)

    p = sub.add_parser("spectrogram", help="log-Mel image and CSV of one WAV")
    p.add_argument("input", nargs="?")
    p.add_argument("--config")
    p.add_argument("-o", "--output", dest="output_dir")
    p.add_argument("--n-mels", type=int, help="128 by default; 64 for motor-noise plots")
    return parser


FLAG_KEYS = {
    "simulate": {"suite": "suite", "seed": "seed", "output_dir": "output_dir", "dry_run": "dry_run",
                 "train_per_class": "recipe.train_per_class", "test_per_set": "recipe.test_per_set",
                 "wrist_speed": "scene.wrist_speed_rad_s"},
    "timedomain": {"dataset_dir": "dataset_dir", "output_dir": "output_dir"},
    "train-eval": {"dataset_dir": "dataset_dir", "output_dir": "output_dir", "seed": "seed",
                   "epochs": "classifier.epochs", "folds": "classifier.k"},
    "spectrogram": {"input": "input", "output_dir": "output_dir", "n_mels": "mel.n_mels"},
}

COMMANDS = {
    "simulate": cmd_simulate,
    "timedomain": cmd_timedomain,
    "train-eval": cmd_train_eval,
    "spectrogram": cmd_spectrogram,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    overrides = {key: getattr(args, attr) for attr, key in FLAG_KEYS[args.command].items()}
    try:
        cfg = load_config(args.command, args.config, overrides)
        return COMMANDS[args.command](cfg)
    except MissingArtifactError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except (ConfigError, InvalidInputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except SmiFingerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
