# tdec_coordination/cli.py
"""
Command-line pipeline. Subcommands communicate through files in the
output directory:

  synth    -> <subject>/<MOD>.csv, <subject>/manifest.json, labels.csv, cohort_<MOD>.csv
  corr     -> matrices/<MOD>/<subject>_<segment>.csv + .json
  eig      -> spectra_<MOD>.csv
  features -> features_<MOD>.csv
  cv       -> cv_report_<MOD>.json
  fuse     -> fused_report.json
  plotdata -> plotdata_<MOD>.csv
  train    -> model_<MOD>.json or stacking_model.json
  select   -> labels.csv

Exit codes: 0 ok, 1 I/O, 2 format or flag error, 3 data or protocol error.
"""

import argparse
import sys
import warnings
from pathlib import Path

from .artifacts import atomic_write_text, write_csv, write_json
from .classify import loso_cv, model_to_dict, report_to_dict, train_on_instances, format_summary
from .cohort import labels_csv, parse_cohort_index, parse_labels, parse_subject_metadata, select_subjects
from .errors import ConvergenceWarning, FormatError, TdecError
from .fusion import align_modalities, fused_loso_cv, stack_train, stacking_to_dict
from .ingest import Modality, extract_segments, parse_channel_csv, parse_segment_manifest
from .jacobi import SOLVERS
from .logger import EventLogger
from .run_config import PRESETS, RunConfig
from .spectrum import (SpectrumRecord, eigenspectrum, feature_rows, group_mean_spectra, normalize,
                       parse_features_csv, parse_index_ranges, parse_spectra_csv, plot_table, pool_features,
                       spectra_rows)
from .synth import SynthSpec, generate_cohort, write_cohort
from .tdec import channel_delay_correlation, matrix_csv_text, matrix_sidecar, read_matrix
from .workers import map_ordered

EXIT_OK = 0
EXIT_IO = 1
EXIT_FORMAT = 2
EXIT_DATA = 3

# argparse dest -> config key (identical names)
CONFIG_FLAGS = ("seed", "out_dir", "delay_scale", "num_delays", "rate", "min_segment_s", "ranges", "c", "gamma",
                "reference", "modality", "positive_label", "negative_label", "standardize", "eigensolver",
                "workers", "kkt_tol", "max_passes")


def exit_code(error):
    if isinstance(error, FormatError):
        return EXIT_FORMAT
    if isinstance(error, TdecError):
        return EXIT_DATA
    if isinstance(error, OSError):
        return EXIT_IO
    if isinstance(error, ValueError):
        return EXIT_FORMAT
    return None


def _read(path):
    return Path(path).read_text(encoding="utf-8")


def _parse_file(path, parser, *args):
    """Run a text parser on a file, naming the file in format errors."""
    try:
        return parser(_read(path), *args)
    except FormatError as e:
        raise FormatError(f"{path}: {e}") from None


def _split(text):
    return [t.strip() for t in str(text).split(",") if t.strip()]


def _int_list(text, flag):
    try:
        return [int(t) for t in _split(text)]
    except ValueError:
        raise ValueError(f"--{flag} expects comma-separated integers, got '{text}'") from None


def _single_modality(items, what):
    modalities = sorted({i.modality_tag.value for i in items})
    if len(modalities) != 1:
        raise FormatError(f"{what} must hold exactly one modality, got {modalities}")
    return modalities[0]


# --- synth ---

def cmd_synth(args, config, log, out_dir):
    groups = _split(args.groups) if args.groups else list(config.classes)
    counts = _int_list(args.subjects, "subjects")
    ranks = _int_list(args.rank, "rank")
    if len(set(groups)) != len(groups):
        raise ValueError(f"--groups names a group twice: {groups}")
    if not len(groups) == len(counts) == len(ranks):
        raise ValueError(f"--subjects and --rank need one value per group {groups}")

    channels = int(args.channels or config.get("channels"))
    templates = {}
    for group, rank in zip(groups, ranks):
        templates[group] = SynthSpec(channels=channels, length_samples=2, sample_rate_hz=float(config.get("rate")),
                                     latent_rank=rank, noise_amplitude=args.noise,
                                     smoothing_halflife_samples=args.halflife, seed=int(config.get("seed")),
                                     modality_tag=config.modality)
    subjects = generate_cohort(dict(zip(groups, counts)), args.segments, templates, int(config.get("seed")),
                               args.segment_s, args.gap_s)
    index = write_cohort(subjects, out_dir)
    for s in subjects:
        log.log_event("SUBJECT_WRITTEN", s.subject_id,
                      f"label={s.label} rank={s.spec.latent_rank} samples={s.spec.length_samples}")
    log.status(f"{len(subjects)} subjects in {len(groups)} groups -> {index}")
    return EXIT_OK


# --- corr ---

def _recordings(args):
    """(subject_id, label, channels path, manifest path, speaker) per recording."""
    if args.cohort:
        base = Path(args.cohort).parent
        return [(e.subject_id, e.label, base / e.channels, base / e.manifest, e.subject_id)
                for e in _parse_file(args.cohort, parse_cohort_index)]
    if not (args.channels and args.manifest and args.speaker):
        raise ValueError("corr needs --cohort, or --channels with --manifest and --speaker")
    subject = args.subject or args.speaker
    if args.label:
        label = args.label
    elif args.labels:
        labels = _parse_file(args.labels, parse_labels)
        if subject not in labels:
            raise FormatError(f"{args.labels}: no label for subject '{subject}'")
        label = labels[subject]
    else:
        raise ValueError("corr needs --label or --labels with --channels")
    return [(subject, label, Path(args.channels), Path(args.manifest), args.speaker)]


def cmd_corr(args, config, log, out_dir):
    embedding = config.embedding_config()
    modality = config.modality
    rate = float(config.get("rate"))
    min_segment_s = float(config.get("min_segment_s"))
    matrix_dir = out_dir / "matrices" / modality.value

    work = []
    recordings = _recordings(args)
    for subject, label, channels_path, manifest_path, speaker in recordings:
        cs = _parse_file(channels_path, parse_channel_csv, rate, modality)
        manifest = _parse_file(manifest_path, parse_segment_manifest)
        segments = extract_segments(cs, manifest, speaker, min_segment_s)
        total = len(manifest.for_speaker(speaker))
        if total > len(segments):
            log.log_event("SEGMENT_SKIPPED", subject,
                          f"{total - len(segments)} of {total} segments not longer than {min_segment_s} s")
        dim = len(cs.channel_names) * embedding.num_delays
        short = [seg.segment_id for seg in segments if seg.length - embedding.span < dim]
        if short:
            log.warning("RANK_DEFICIENT", subject,
                        f"{len(short)} segment(s) have fewer embedded rows than the {dim} dimensions; "
                        f"trailing eigenvalues will be zero")
        work.extend((subject, label, channels_path, seg) for seg in segments)

    def correlate(item):
        subject, label, channels_path, seg = item
        try:
            m = channel_delay_correlation(seg, embedding)
        except TdecError as e:
            log.error("SEGMENT_FAILED", subject, f"{channels_path} {seg.segment_id}: {e}")
            raise
        stem = f"{subject}_{seg.segment_id}"
        atomic_write_text(matrix_dir / f"{stem}.csv", matrix_csv_text(m))
        atomic_write_text(matrix_dir / f"{stem}.json",
                          matrix_sidecar(m, subject_id=subject, segment_id=seg.segment_id, label=label,
                                         modality=modality.value))
        log.log_event("MATRIX_WRITTEN", subject, f"{seg.segment_id} {m.dim}x{m.dim}")
        return m.dim

    dims = map_ordered(correlate, work, int(config.get("workers")))
    if not dims:
        log.warning("NO_SEGMENTS", "", f"no segment longer than {min_segment_s} s in {len(recordings)} recording(s)")
        return EXIT_OK
    log.status(f"{len(dims)} matrices ({dims[0]}x{dims[0]}) for {len(recordings)} recording(s) -> {matrix_dir}")
    return EXIT_OK


# --- eig ---

def _load_spectrum(sidecar, solver):
    m, meta = read_matrix(sidecar.parent / f"{sidecar.stem}.csv", sidecar)
    try:
        return SpectrumRecord(eigenspectrum(m, solver), str(meta["segment_id"]), str(meta["subject_id"]),
                              str(meta["label"]), Modality.parse(meta["modality"]))
    except KeyError as e:
        raise FormatError(f"{sidecar}: sidecar lacks {e}") from None


def cmd_eig(args, config, log, out_dir):
    matrix_dir = Path(args.matrices) if args.matrices else out_dir / "matrices" / config.modality.value
    if not matrix_dir.is_dir():
        raise FileNotFoundError(f"matrix directory {matrix_dir} does not exist")
    sidecars = sorted(matrix_dir.glob("*.json"))
    if not sidecars:
        raise TdecError(f"no matrices in {matrix_dir}")

    solver = config.get("eigensolver")
    records = map_ordered(lambda p: _load_spectrum(p, solver), sidecars, int(config.get("workers")))
    records.sort(key=lambda r: (r.subject_id, r.segment_id))
    modality = _single_modality(records, str(matrix_dir))
    path = out_dir / f"spectra_{modality}.csv"
    write_csv(path, *spectra_rows(records))
    log.log_event("SPECTRA_WRITTEN", "", f"{len(records)} spectra of dim {records[0].spectrum.dim} ({solver})")
    log.status(f"{len(records)} eigenspectra -> {path}")
    return EXIT_OK


# --- features ---

def _spectra(args, config, out_dir):
    path = Path(args.spectra) if args.spectra else out_dir / f"spectra_{config.modality.value}.csv"
    records = _parse_file(path, parse_spectra_csv)
    if not records:
        raise TdecError(f"{path} holds no spectra")
    return records, _single_modality(records, str(path))


def cmd_features(args, config, log, out_dir):
    ranges = config.index_ranges()
    records, modality = _spectra(args, config, out_dir)
    instances = [pool_features(normalize(r.spectrum), ranges, r.subject_id, r.label, r.modality_tag, r.segment_id)
                 for r in records]
    path = out_dir / f"features_{modality}.csv"
    write_csv(path, *feature_rows(instances))
    log.log_event("FEATURES_WRITTEN", "", f"{len(instances)} instances, ranges {config.get('ranges')}")
    log.status(f"{len(instances)} instances x {len(ranges)} features -> {path}")
    return EXIT_OK


# --- cv / fuse / train ---

def _features(path):
    instances = _parse_file(path, parse_features_csv)
    if not instances:
        raise TdecError(f"{path} holds no instances")
    return instances, _single_modality(instances, str(path))


def _datasets(paths):
    datasets = {}
    for path in paths:
        instances, modality = _features(path)
        if modality in datasets:
            raise ValueError(f"two feature files for modality {modality}")
        datasets[modality] = instances
    return datasets


def _log_folds(log, report):
    for fold in report.folds:
        log.log_event("FOLD_DONE", fold.subject, f"accuracy={fold.accuracy:.4f} n={len(fold.labels)}")
        if not fold.converged:
            log.warning("CONVERGENCE_WARNING", fold.subject, f"SMO did not converge in fold {fold.subject}")


def _report_json(report, config, **extra):
    data = dict(extra)
    data["svm_params"] = config.svm_params().to_dict()
    data["standardize"] = config.get("standardize")
    data.update(report_to_dict(report))
    return data


def _print_table(args, rows, classes):
    if not args.quiet:
        print(format_summary(rows, classes))


def cmd_cv(args, config, log, out_dir):
    path = Path(args.features) if args.features else out_dir / f"features_{config.modality.value}.csv"
    instances, modality = _features(path)
    report = loso_cv(instances, config.svm_params(), config.classes, config.get("standardize"),
                     int(config.get("workers")))
    _log_folds(log, report)
    out = out_dir / f"cv_report_{modality}.json"
    write_json(out, _report_json(report, config, modality=modality))
    log.status(f"{len(report.folds)} folds, mean accuracy {report.mean_accuracy * 100:.2f}% -> {out}")
    _print_table(args, [(modality, config.get("ranges"), report)], config.classes)
    return EXIT_OK


def cmd_fuse(args, config, log, out_dir):
    if not args.features or len(args.features) < 2:
        raise ValueError("fuse needs --features for at least two modalities")
    datasets = _datasets(args.features)
    align_modalities(datasets)
    params = config.svm_params()
    workers = int(config.get("workers"))

    singles = {m: loso_cv(datasets[m], params, config.classes, config.get("standardize"), workers)
               for m in sorted(datasets)}
    fused = fused_loso_cv(datasets, params, config.classes, workers)
    _log_folds(log, fused)
    out = out_dir / "fused_report.json"
    data = _report_json(fused, config, modalities=sorted(datasets))
    data["single_modality"] = {m: report_to_dict(r) for m, r in singles.items()}
    write_json(out, data)
    log.status(f"{len(fused.folds)} folds, fused accuracy {fused.mean_accuracy * 100:.2f}% -> {out}")
    rows = [(m, config.get("ranges"), r) for m, r in singles.items()]
    rows.append(("Multi-modal", None, fused))
    _print_table(args, rows, config.classes)
    return EXIT_OK


def cmd_train(args, config, log, out_dir):
    if not args.features or len(args.features) > 2:
        raise ValueError("train needs --features for one modality, or two for a stacking model")
    datasets = _datasets(args.features)
    params = config.svm_params()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ConvergenceWarning)
        if len(datasets) == 1:
            (modality, instances), = datasets.items()
            model = train_on_instances(instances, params, config.classes)
            out = out_dir / f"model_{modality}.json"
            write_json(out, model_to_dict(model))
        else:
            model = stack_train(datasets, params, config.classes)
            out = out_dir / "stacking_model.json"
            write_json(out, stacking_to_dict(model))
    for w in caught:
        if issubclass(w.category, ConvergenceWarning):
            log.warning("CONVERGENCE_WARNING", "", str(w.message))
    log.log_event("MODEL_WRITTEN", "", str(out))
    log.status(f"model -> {out}")
    return EXIT_OK


# --- plotdata / select ---

def cmd_plotdata(args, config, log, out_dir):
    records, modality = _spectra(args, config, out_dir)
    zoom = parse_index_ranges(args.zoom) if args.zoom else None
    reference = config.get("reference")
    group_means = group_mean_spectra(records)
    if reference not in group_means:
        raise TdecError(f"reference group '{reference}' not present (groups {sorted(group_means)})")
    header, rows = plot_table(group_means, reference, zoom)
    path = out_dir / f"plotdata_{modality}.csv"
    write_csv(path, header, rows)
    log.log_event("PLOTDATA_WRITTEN", "", f"groups {sorted(group_means)} reference {reference}")
    log.status(f"{len(rows)} rows for {len(group_means)} groups -> {path}")
    return EXIT_OK


def cmd_select(args, config, log, out_dir):
    subjects = _parse_file(args.metadata, parse_subject_metadata)
    chosen = select_subjects(subjects)
    path = out_dir / "labels.csv"
    atomic_write_text(path, labels_csv(chosen))
    counts = {}
    for _, label in chosen:
        counts[label] = counts.get(label, 0) + 1
    summary = ", ".join(f"{label}={n}" for label, n in sorted(counts.items())) or "none"
    log.log_event("SUBJECTS_SELECTED", "", summary)
    log.status(f"{len(chosen)} of {len(subjects)} subjects selected ({summary}) -> {path}")
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "corr": cmd_corr,
    "eig": cmd_eig,
    "features": cmd_features,
    "cv": cmd_cv,
    "fuse": cmd_fuse,
    "plotdata": cmd_plotdata,
    "train": cmd_train,
    "select": cmd_select,
}


def _common_flags():
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("run configuration")
    g.add_argument("--preset", choices=sorted(PRESETS), help="modality preset (tv: 100 Hz, fau: 28 fps)")
    g.add_argument("--config", help="JSON config file (default: ./tdec_config.json if present)")
    g.add_argument("--out-dir", dest="out_dir")
    g.add_argument("--seed", type=int)
    g.add_argument("--rate", type=float, help="sampling rate in Hz")
    g.add_argument("--delay-scale", dest="delay_scale", type=int, help="lag step in samples")
    g.add_argument("--num-delays", dest="num_delays", type=int)
    g.add_argument("--min-segment-s", dest="min_segment_s", type=float)
    g.add_argument("--ranges", help="index ranges lo:hi,lo:hi over the normalized eigenspectrum")
    g.add_argument("--modality", type=str.upper, choices=[m.value for m in Modality])
    g.add_argument("--c", type=float, help="SVM box constraint")
    g.add_argument("--gamma", help="RBF width, or 'auto'")
    g.add_argument("--kkt-tol", dest="kkt_tol", type=float)
    g.add_argument("--max-passes", dest="max_passes", type=int)
    g.add_argument("--reference", help="reference group for difference curves")
    g.add_argument("--positive-label", dest="positive_label")
    g.add_argument("--negative-label", dest="negative_label")
    g.add_argument("--standardize", choices=("fold", "global"))
    g.add_argument("--eigensolver", choices=SOLVERS)
    g.add_argument("--workers", type=int)
    g.add_argument("--quiet", action="store_true", help="no console status lines")
    return common


def build_parser():
    common = _common_flags()
    parser = argparse.ArgumentParser(prog="tdec_pipeline",
                                     description="Time-delay embedded correlation features and classifiers")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="write a synthetic cohort")
    p.add_argument("--groups", help="group labels (default: positive,negative label)")
    p.add_argument("--subjects", default="6,6", help="subjects per group")
    p.add_argument("--rank", default="2,5", help="latent rank per group")
    p.add_argument("--channels", type=int, help="channel count (default from preset)")
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--halflife", type=float, default=5.0, help="AR(1) smoothing half-life in samples")
    p.add_argument("--segments", type=int, default=3, help="subject turns per subject")
    p.add_argument("--segment-s", dest="segment_s", type=float, default=15.0,
                   help="subject turn length; 15 s keeps FAU segments longer than their 255 embedding dimensions")
    p.add_argument("--gap-s", dest="gap_s", type=float, default=2.0)

    p = sub.add_parser("corr", parents=[common], help="channel-delay correlation matrices per segment")
    p.add_argument("--cohort", help="cohort index CSV written by synth")
    p.add_argument("--channels", help="channel CSV of one recording")
    p.add_argument("--manifest", help="diarization manifest JSON")
    p.add_argument("--speaker", help="speaker id of the subject in the manifest")
    p.add_argument("--subject", help="subject id (default: the speaker id)")
    p.add_argument("--label")
    p.add_argument("--labels", help="label file subject_id,label")

    p = sub.add_parser("eig", parents=[common], help="eigenspectra of correlation matrices")
    p.add_argument("--matrices", help="matrix directory (default: <out>/matrices/<MODALITY>)")

    p = sub.add_parser("features", parents=[common], help="pool eigenspectrum index ranges")
    p.add_argument("--spectra")

    p = sub.add_parser("cv", parents=[common], help="leave-one-subject-out SVM cross-validation")
    p.add_argument("--features")

    p = sub.add_parser("fuse", parents=[common], help="stacked multi-modal cross-validation")
    p.add_argument("--features", action="append")

    p = sub.add_parser("plotdata", parents=[common], help="group mean eigenspectra and difference curves")
    p.add_argument("--spectra")
    p.add_argument("--zoom", help="only rows inside these index ranges")

    p = sub.add_parser("train", parents=[common], help="fit an SVM, or a stacking model from two modalities")
    p.add_argument("--features", action="append")

    p = sub.add_parser("select", parents=[common], help="label file from clinical scale scores")
    p.add_argument("--metadata", required=True, help="CSV subject_id,group,bprs,hamd")
    return parser


def resolve_config(args):
    overrides = {key: getattr(args, key) for key in CONFIG_FLAGS}
    return RunConfig(preset=args.preset, config_path=args.config, overrides=overrides).validate()


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_FORMAT

    tag = args.command.upper()
    try:
        config = resolve_config(args)
    except Exception as e:
        code = exit_code(e)
        if code is None:
            raise
        print(f"[{tag}] ERROR: {e}", file=sys.stderr)
        return code

    out_dir = Path(config.get("out_dir"))
    try:
        log = EventLogger(out_dir, tag=tag, quiet=args.quiet)
    except OSError as e:
        print(f"[{tag}] ERROR: {e}", file=sys.stderr)
        return EXIT_IO

    with log:
        log.log_event("START", "", " ".join(argv))
        try:
            code = COMMANDS[args.command](args, config, log, out_dir)
            config.save(out_dir)
        except Exception as e:
            code = exit_code(e)
            if code is None:
                raise
            log.error("FAILED", "", f"{type(e).__name__}: {e}")
            return code
        log.log_event("DONE", "", f"exit {code}")
    return code
