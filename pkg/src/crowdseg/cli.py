"""Operator command line: ingest -> merge -> eval -> synth -> build -> report,
plus ``serve`` for the assist service and ``demo`` to generate the bundled
offline campaign.

Exit codes: 0 success, 1 validation error, 2 upstream/IO failure.
Artifacts are written atomically (temp file + rename); logs go to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from pathlib import Path

from . import dataset_builder as db
from . import demo, metrics
from .errors import (
    CrowdsegError,
    ImageFetchError,
    UpstreamMalformed,
    UpstreamTimeout,
)
from .fusion import MergePolicy, merge_labels
from .ingest import load_campaign
from .mask_core import read_gray_png, read_label_png, write_counts_png, write_label_png
from .metrics import MetricReport, aggregate, score_labelmaps, unpaired_t_test
from .synth import SynthesisParams, remote_generate, toy_synthesize, write_record

log = logging.getLogger("crowdseg")


def atomic_write_text(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_move(writer, path):
    """Run writer(tmp_path) then rename onto path."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    os.close(fd)
    try:
        writer(tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def cmd_demo(args):
    path = demo.generate_campaign(
        args.out,
        n_images=args.n_images,
        n_annotators=args.n_annotators,
        seed=args.seed,
        skill=args.skill,
    )
    print(path)
    return 0


def cmd_ingest(args):
    campaign = load_campaign(args.campaign)
    summary = {
        "images": len(campaign.annotation_sets),
        "annotators": sorted(
            {a for s in campaign.annotation_sets for a in s.labelmaps}
        ),
        "classes": [e.name for e in campaign.palette],
        "ground_truth": sorted(campaign.ground_truth),
        "superseded": len(campaign.superseded),
        "tasks": [t.task_id for t in campaign.tasks],
    }
    text = json.dumps(summary, sort_keys=True, indent=2) + "\n"
    if args.out:
        atomic_write_text(args.out, text)
    else:
        print(text, end="")
    return 0


def cmd_merge(args):
    campaign = load_campaign(args.campaign)
    policy = MergePolicy(threshold=args.threshold)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for s in campaign.annotation_sets:
        merged, freqs = merge_labels(s.ensemble, policy)
        atomic_move(lambda p, m=merged: write_label_png(m, p), out / f"{s.image_id}.png")
        for c, fm in freqs.items():
            atomic_move(
                lambda p, fm=fm: write_counts_png(fm.counts, p),
                out / f"{s.image_id}_freq_c{c}.png",
            )
        log.info("merged %s from %d annotators", s.image_id, len(s.ensemble))
    print(f"seed=n/a threshold={args.threshold} images={len(campaign.annotation_sets)}")
    return 0


def _collect_scores(campaign, pred_dir):
    per_class = {c: [] for c in campaign.palette.class_ids}
    pred_dir = Path(pred_dir)
    n = 0
    for image_id in sorted(campaign.ground_truth):
        pred_path = pred_dir / f"{image_id}.png"
        if not pred_path.exists():
            continue
        pred = read_label_png(pred_path, campaign.palette)
        gt = campaign.ground_truth[image_id].label
        for s in score_labelmaps(pred, gt):
            per_class[s.class_id].append(s)
        n += 1
    return per_class, n


def cmd_eval(args):
    campaign = load_campaign(args.campaign)
    per_class, n = _collect_scores(campaign, args.pred)
    if n == 0:
        raise CrowdsegError(f"no predictions found in {args.pred}")
    rows = tuple(
        aggregate(scores, args.confidence, roi=campaign.palette.name_of(c))
        for c, scores in sorted(per_class.items())
        if scores
    )
    report = MetricReport(rows)
    csv_text = metrics.report_to_csv(report)
    table = metrics.report_to_table(report)
    if args.out:
        atomic_write_text(Path(args.out) / "report.csv", csv_text)
        atomic_write_text(Path(args.out) / "report.txt", table)
    sys.stdout.write(table)
    return 0


def cmd_synth(args):
    campaign = load_campaign(args.campaign)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    endpoint = args.endpoint or os.environ.get("GENERATOR_URL")
    for image_id in sorted(campaign.ground_truth):
        label = campaign.ground_truth[image_id].label
        if endpoint:
            rec = remote_generate(
                label, endpoint, request_id=image_id, source_ref=image_id
            )
        else:
            params = SynthesisParams.defaults_for(
                campaign.palette,
                noise_sigma=args.noise_sigma,
                blur_sigma=args.blur_sigma,
                seed=args.seed,
            )
            rec = toy_synthesize(label, params, source_ref=image_id)
        write_record(
            rec, out / f"{image_id}_synth.png", out / f"{image_id}_synth.json"
        )
    print(f"seed={args.seed} generated={len(campaign.ground_truth)}")
    return 0


def cmd_build(args):
    campaign = load_campaign(args.campaign)
    gate = db.QualityGate(min_dsc=args.min_dsc, min_iou=args.min_iou)
    recipe = db.Recipe(
        n_real_train=args.n_train,
        n_synthetic=args.n_synthetic,
        n_crowd=args.n_crowd,
        n_test=args.n_test,
    )
    pool = sorted(campaign.ground_truth)
    train_ids, test_ids = db.split_pool(pool, recipe.n_real_train, recipe.n_test, args.seed)

    campaign_dir = Path(args.campaign).parent

    def image_entry(image_id):
        for s in campaign.annotation_sets:
            if s.image_id == image_id:
                return s.image_ref
        return f"images/{image_id}.png"

    real_train = [
        db.DatasetItem(image_entry(i), f"gt/{i}.png", "real", "train", {"image_id": i})
        for i in train_ids
    ]
    test = [
        db.DatasetItem(image_entry(i), f"gt/{i}.png", "real", "test", {"image_id": i})
        for i in test_ids
    ]

    synthetic = []
    if args.variant in ("enlarged", "enhanced"):
        synth_dir = Path(args.synth_dir) if args.synth_dir else None
        for i in train_ids:
            if synth_dir and (synth_dir / f"{i}_synth.png").exists():
                sidecar = json.loads((synth_dir / f"{i}_synth.json").read_text())
                synthetic.append(
                    db.DatasetItem(
                        str(synth_dir / f"{i}_synth.png"),
                        f"gt/{i}.png",
                        "synthetic",
                        "train",
                        {"generator": sidecar["generator"], "digest": sidecar["digest"]},
                    )
                )

    crowd = []
    if args.variant == "enhanced":
        merged_dir = Path(args.merged_dir) if args.merged_dir else None
        candidates = []
        if merged_dir:
            for i in sorted(campaign.ground_truth):
                mp = merged_dir / f"{i}.png"
                if not mp.exists():
                    continue
                merged = read_label_png(mp, campaign.palette)
                verdict = db.apply_gate(
                    merged, campaign.ground_truth[i].label, gate, image_id=i
                )
                if verdict.passed:
                    candidates.append((i, mp, verdict))
        for i, mp, verdict in candidates[: recipe.n_crowd]:
            scores = {
                campaign.palette.name_of(v.class_id): {"dsc": v.dsc, "iou": v.iou}
                for v in verdict.per_class
                if v.passed
            }
            crowd.append(
                db.DatasetItem(
                    image_entry(i),
                    str(mp),
                    "crowd_merged",
                    "train",
                    {
                        "gate_passed": True,
                        "gate_scores": scores,
                        "threshold": args.threshold,
                        "passing_classes": list(verdict.passing_classes),
                    },
                )
            )

    manifest = db.build_variant(
        args.variant,
        real_train,
        synthetic,
        crowd,
        test,
        args.seed,
        recipe=recipe,
        palette_json=tuple(json.dumps(e, sort_keys=True) for e in campaign.palette.to_json()),
    )
    text = (
        db.manifest_to_csv(manifest)
        if args.format == "csv"
        else db.manifest_to_json(manifest)
    )
    atomic_write_text(args.out, text)
    print(f"seed={args.seed} variant={args.variant} items={len(manifest.items)}")
    return 0


def cmd_report(args):
    import csv as _csv

    with open(args.csv) as f:
        rows = list(_csv.DictReader(f))
    report = MetricReport(
        tuple(
            metrics.ReportRow(
                r["roi"],
                float(r["mean_dsc"]),
                float(r["dsc_lo"]),
                float(r["dsc_hi"]),
                float(r["mean_iou"]),
                float(r["iou_lo"]),
                float(r["iou_hi"]),
                int(r["n"]),
            )
            for r in rows
        )
    )
    sys.stdout.write(metrics.report_to_table(report))
    return 0


def cmd_serve(args):
    import uvicorn

    from .assist.predictor import PredictorConfig
    from .assist.service import create_app

    remote_url = args.remote_url or os.environ.get("ASSIST_REMOTE_URL")
    backend = "remote" if remote_url else args.backend
    config = PredictorConfig(
        backend=backend,
        remote_url=remote_url if backend == "remote" else None,
        timeout_ms=args.timeout_ms,
        retries=args.retries,
    )
    app = create_app(config, audit_path=args.audit_log)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="crowdseg")
    p.add_argument("--config", help="JSON file of defaults for the subcommand flags")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="subcommand", required=True)

    d = sub.add_parser("demo", help="generate the bundled offline demo campaign")
    d.add_argument("--out", required=True)
    d.add_argument("--n-images", type=int, default=8)
    d.add_argument("--n-annotators", type=int, default=5)
    d.add_argument("--seed", type=int, default=1234)
    d.add_argument("--skill", choices=("crowd", "expert"), default="crowd")
    d.set_defaults(fn=cmd_demo)

    i = sub.add_parser("ingest", help="validate and summarize a campaign manifest")
    i.add_argument("--campaign", required=True)
    i.add_argument("--out")
    i.set_defaults(fn=cmd_ingest)

    m = sub.add_parser("merge", help="majority-vote fusion over a campaign")
    m.add_argument("--campaign", required=True)
    m.add_argument("--threshold", type=int, default=4)
    m.add_argument("--out", required=True)
    m.set_defaults(fn=cmd_merge)

    e = sub.add_parser("eval", help="score predictions against ground truth")
    e.add_argument("--campaign", required=True)
    e.add_argument("--pred", required=True)
    e.add_argument("--confidence", type=float, default=0.95)
    e.add_argument("--out")
    e.set_defaults(fn=cmd_eval)

    s = sub.add_parser("synth", help="generate synthetic images from ground truth labels")
    s.add_argument("--campaign", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--noise-sigma", type=float, default=0.0)
    s.add_argument("--blur-sigma", type=float, default=0.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--endpoint", help="remote generator URL (or GENERATOR_URL env)")
    s.set_defaults(fn=cmd_synth)

    b = sub.add_parser("build", help="assemble a dataset manifest variant")
    b.add_argument("--campaign", required=True)
    b.add_argument("--variant", choices=db.VARIANTS, required=True)
    b.add_argument("--synth-dir")
    b.add_argument("--merged-dir")
    b.add_argument("--out", required=True)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--n-train", type=int, default=10)
    b.add_argument("--n-test", type=int, default=10)
    b.add_argument("--n-synthetic", type=int, default=10)
    b.add_argument("--n-crowd", type=int, default=5)
    b.add_argument("--min-dsc", type=float, default=0.95)
    b.add_argument("--min-iou", type=float, default=0.92)
    b.add_argument("--threshold", type=int, default=4)
    b.add_argument("--format", choices=("json", "csv"), default="json")
    b.set_defaults(fn=cmd_build)

    r = sub.add_parser("report", help="format an eval CSV as a text table")
    r.add_argument("--csv", required=True)
    r.set_defaults(fn=cmd_report)

    sv = sub.add_parser("serve", help="run the assist service")
    sv.add_argument("--host", default="127.0.0.1")
    sv.add_argument("--port", type=int, default=9090)
    sv.add_argument("--backend", choices=("builtin", "remote"), default="builtin")
    sv.add_argument("--remote-url")
    sv.add_argument("--timeout-ms", type=int, default=30000)
    sv.add_argument("--retries", type=int, default=1)
    sv.add_argument("--audit-log")
    sv.set_defaults(fn=cmd_serve)

    return p


def main(argv=None):
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)

    # --config supplies flag defaults for the chosen subcommand
    config_path = None
    if "--config" in argv:
        config_path = argv[argv.index("--config") + 1]
    if config_path:
        overrides = json.loads(Path(config_path).read_text())
        for k, v in overrides.items():
            flag = "--" + k.replace("_", "-")
            if flag not in " ".join(argv):
                argv += [flag, str(v)]

    args = parser.parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.fn(args)
    except (UpstreamTimeout, UpstreamMalformed, ImageFetchError, OSError) as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return 2
    except CrowdsegError as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
