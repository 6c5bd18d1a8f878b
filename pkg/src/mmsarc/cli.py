"""Command-line entry point: ``mmsarc <verb> --config CFG [--seed N] [--out DIR]``.

Every verb reads a JSON config (paths in it are relative to the config
file), writes its artifacts under ``--out`` and a ``manifest.json`` with the
root seed, the config hash and the hashes of all inputs and outputs.
Wall-clock timings go to ``timings.json`` so that every other artifact is a
pure function of the manifest inputs.

Exit codes: 0 success, 1 invalid input (one ``error: <kind>: <message>``
line on stderr), 2 usage error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from collections import Counter
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__, annotate, fusionnet, kernels, svm
from .corpus import FilterConfig, Label, corpus_stats, filter_post, read_corpus, strip_collection_artifacts, write_corpus
from .evaluation import (
    DEEP_MODES,
    ExperimentConfig,
    FeatureContext,
    balanced_split,
    net_inputs,
    run_experiment,
    svm_features,
)
from .synth import SynthParams, synth_incongruity_corpus
from .textfeat import LexResources, NgramVocab, build_ngram_vocab, unigram_vocab, write_resources
from .visfeat import AVR_DIM, ConceptVocab, FeatureStore, write_avr, write_concepts

log = logging.getLogger("mmsarc")

VERBS = ("ingest", "stats", "featurize", "train-svm", "train-net", "evaluate", "agreement", "gold", "predict", "synth")


class UsageError(Exception):
    pass


def sha256_file(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


class Run:
    """Resolved config plus bookkeeping for one command invocation."""

    def __init__(self, verb: str, config: dict, base: Path, out: Path, seed: int, threads: int):
        self.verb = verb
        self.config = config
        self.base = base
        self.out = out
        self.seed = seed
        self.threads = threads
        self.inputs: dict[str, str] = {}
        self.outputs: list[str] = []
        self.timings: dict[str, float] = {}

    def path(self, key: str, required: bool = True) -> Path | None:
        val = self.config.get(key)
        if val is None:
            if required:
                raise ValueError(f"config is missing {key!r}")
            return None
        p = Path(val)
        p = p if p.is_absolute() else self.base / p
        if not p.exists():
            raise FileNotFoundError(f"{key}: {p} does not exist")
        if p.is_dir():
            h = hashlib.sha256()
            for f in sorted(p.rglob("*")):
                # wall-clock timings would make the manifest irreproducible
                if f.is_file() and f.name != "timings.json":
                    h.update(str(f.relative_to(p)).encode() + b"\0" + f.read_bytes())
            self.inputs[key] = h.hexdigest()
        else:
            self.inputs[key] = sha256_file(p)
        return p

    def write(self, name: str, text: str) -> Path:
        p = self.out / name
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text, encoding="utf-8")
        self.outputs.append(name)
        return p

    def register(self, name: str) -> None:
        self.outputs.append(name)

    def finish(self) -> None:
        cfg_blob = json.dumps(self.config, sort_keys=True).encode()
        manifest = {
            "tool": "mmsarc",
            "version": __version__,
            "verb": self.verb,
            "seed": self.seed,
            "config_sha256": hashlib.sha256(cfg_blob).hexdigest(),
            "config": self.config,
            "inputs": dict(sorted(self.inputs.items())),
            "outputs": {n: sha256_file(self.out / n) for n in sorted(set(self.outputs))},
        }
        (self.out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        (self.out / "timings.json").write_text(
            json.dumps({"kernel_backend": kernels.BACKEND, **self.timings}, indent=2, sort_keys=True) + "\n"
        )


# --------------------------------------------------------------------------
# loaders shared by several verbs


def load_store(run: Run) -> FeatureStore:
    concepts = run.path("concepts", required=False)
    avr = run.path("avr", required=False)
    vocab_path = run.path("concept_vocab", required=False)
    vocab = ConceptVocab.from_file(vocab_path) if vocab_path else None
    return FeatureStore.load(concepts, avr, vocab, int(run.config.get("avr_dim", AVR_DIM)))


def load_resources(run: Run) -> LexResources:
    p = run.path("resources", required=False)
    return LexResources.from_dir(p) if p else LexResources()


def labeled(posts):
    return [p for p in posts if p.label is not Label.UNLABELED]


# --------------------------------------------------------------------------
# verbs


def cmd_ingest(run: Run) -> None:
    posts = read_corpus(run.path("corpus"))
    cfg = FilterConfig(**{k: tuple(v) if isinstance(v, list) else v for k, v in run.config.get("filter", {}).items()})
    avail_path = run.path("available_images", required=False)
    available = None
    if avail_path:
        available = {line.split()[0] for line in avail_path.read_text().splitlines() if line.strip()}
    kept, hist, rows = [], Counter(), []
    for p in posts:
        v = filter_post(p, cfg, available)
        rows.append(f"{p.id}\t{v}")
        if v.keep:
            kept.append(strip_collection_artifacts(p, cfg))
            hist["keep"] += 1
        else:
            hist[v.reason.value] += 1
    write_corpus(kept, run.out / "filtered.jsonl")
    run.register("filtered.jsonl")
    run.write("verdicts.tsv", "\n".join(rows) + "\n")
    run.write("rejects.json", json.dumps(dict(sorted(hist.items())), indent=2) + "\n")
    print(f"kept {len(kept)} of {len(posts)} posts")
    for reason, n in sorted(hist.items()):
        print(f"  {reason:<28} {n}")


def cmd_stats(run: Run) -> None:
    posts = read_corpus(run.path("corpus"))
    by_platform = {"all": posts}
    for p in posts:
        by_platform.setdefault(p.platform.value, []).append(p)
    out = {k: corpus_stats(v).as_dict() for k, v in by_platform.items()}
    run.write("stats.json", json.dumps(out, indent=2, sort_keys=True) + "\n")
    head = f"{'':<4} {'#posts':>7} {'words':>7} {'emojis':>7} {'tags':>7} {'w/text%':>8} {'w/img%':>8} {'both%':>8}"
    print(head)
    for k, s in out.items():
        print(
            f"{k:<4} {s['n_posts']:>7} {s['avg_words']:>7.2f} {s['avg_emojis']:>7.2f} {s['avg_tags']:>7.2f} "
            f"{s['pct_with_text']:>8.2f} {s['pct_with_images']:>8.2f} {s['pct_with_both']:>8.2f}"
        )


def _split(run: Run, posts):
    ratio = float(run.config.get("split_ratio", 0.5))
    train, test = balanced_split(labeled(posts), ratio, run.seed)
    run.write("split.json", json.dumps({"train": [p.id for p in train], "test": [p.id for p in test]}) + "\n")
    return train, test


def cmd_featurize(run: Run) -> None:
    posts = read_corpus(run.path("corpus"))
    fs = run.config.get("feature_set", "combination+vsf")
    store, res = load_store(run), load_resources(run)
    train, _ = _split(run, posts)
    vocab = build_ngram_vocab(train, int(run.config.get("min_count", 1)))
    run.write("vocab.txt", "\n".join(vocab.to_lines()) + "\n")
    ctx = FeatureContext(res, store, vocab, run.config.get("policy", "union"))
    lines = []
    layout = None
    for p in posts:
        x = svm_features(p, fs, ctx)
        layout = layout or x.layout
        i, v = x.nonzeros()
        lines.append(json.dumps({"id": p.id, "label": p.label.value, "indices": i.tolist(), "values": [float(a) for a in v]}))
    header = json.dumps({"feature_set": fs, "layout": layout})
    run.write("features.jsonl", header + "\n" + "\n".join(lines) + "\n")
    print(f"{len(posts)} vectors, {sum(d for _, d in layout.values())} dims, layout {layout}")


def cmd_train_svm(run: Run) -> None:
    posts = read_corpus(run.path("corpus"))
    fs = run.config.get("feature_set", "ngrams+vsf")
    store, res = load_store(run), load_resources(run)
    train, test = _split(run, posts)
    vocab = build_ngram_vocab(train, int(run.config.get("min_count", 1)))
    ctx = FeatureContext(res, store, vocab, run.config.get("policy", "union"))
    cfg = svm.TrainConfig(**{"seed": run.seed, **run.config.get("svm", {})})
    t0 = time.perf_counter()
    X = [svm_features(p, fs, ctx) for p in train]
    model = svm.train(X, [p.label.sign() for p in train], cfg)
    run.timings["train"] = time.perf_counter() - t0
    svm.save_model(model, run.out / "model.svm")
    run.register("model.svm")
    run.write("vocab.txt", "\n".join(vocab.to_lines()) + "\n")
    meta = {"kind": "svm", "feature_set": fs, "policy": ctx.policy, "vocab_sha256": vocab.digest(), "svm": asdict(cfg)}
    run.write("model.json", json.dumps(meta, indent=2, sort_keys=True) + "\n")
    Xte = [svm_features(p, fs, ctx) for p in test]
    pred, _ = svm.predict_many(model, Xte)
    acc = float(np.mean(pred == np.array([p.label.sign() for p in test])))
    print(f"trained {fs} SVM on {len(train)} posts in {model.epochs} epochs; held-out accuracy {acc:.4f}")


def cmd_train_net(run: Run) -> None:
    posts = read_corpus(run.path("corpus"))
    fs = run.config.get("feature_set", "unigram+avr")
    if fs not in DEEP_MODES:
        raise ValueError(f"feature_set must be one of {sorted(DEEP_MODES)}")
    store = load_store(run)
    train, test = _split(run, posts)
    vocab = unigram_vocab(train, int(run.config.get("min_count", 1)))
    policy = run.config.get("policy", "union")
    data = net_inputs(train, vocab, store, policy)
    net_cfg = fusionnet.NetConfig(len(vocab), int(run.config.get("text_hidden", 512)), store.avr_dim)
    tcfg = fusionnet.NetTrainConfig(**{"seed": run.seed, **run.config.get("net", {}), "mode": DEEP_MODES[fs]})
    t0 = time.perf_counter()
    net = fusionnet.train(data, net_cfg, tcfg)
    run.timings["train"] = time.perf_counter() - t0
    fusionnet.save_checkpoint(
        net, run.out / "model.net", vocab.digest(), {"feature_set": fs, "train": {**asdict(tcfg), "mode": tcfg.mode.value}}
    )
    run.register("model.net")
    run.write("vocab.txt", "\n".join(vocab.to_lines()) + "\n")
    meta = {"kind": "net", "feature_set": fs, "policy": policy, "vocab_sha256": vocab.digest(), "topology": net.topology()}
    run.write("model.json", json.dumps(meta, indent=2, sort_keys=True) + "\n")
    dte = net_inputs(test, vocab, store, policy)
    acc = float(np.mean(net.predict(dte.text, dte.avr) == dte.y))
    print(
        f"trained {fs} network (lr={tcfg.learning_rate}, momentum={tcfg.momentum}, "
        f"batch={tcfg.batch_size}, epochs={tcfg.epochs}); held-out accuracy {acc:.4f}"
    )
    print("topology: " + ", ".join(f"{k}={v}" for k, v in net.topology().items()))


def cmd_evaluate(run: Run) -> None:
    posts = read_corpus(run.path("corpus"))
    store, res = load_store(run), load_resources(run)
    exp = ExperimentConfig.from_dict({"seed": run.seed, **run.config.get("experiment", {})})
    gold = None
    gold_path = run.path("gold", required=False)
    if gold_path:
        gold = annotate.GoldSet.from_dict(json.loads(gold_path.read_text()))
    t0 = time.perf_counter()
    report = run_experiment(exp, posts, store, res, gold, threads=run.threads)
    run.timings["evaluate"] = time.perf_counter() - t0
    run.timings.update({f"cell.{k}": v for k, v in report.timings.items()})
    run.write("report.txt", report.to_text())
    run.write("report.kv", report.to_kv())
    print(report.to_text(), end="")


def _judgment_groups(run: Run) -> dict[str, list]:
    """Judgments keyed by platform when the config maps platform -> file."""
    src = run.config.get("judgments")
    if not isinstance(src, dict):
        return {"all": annotate.read_judgments(run.path("judgments"))}
    groups = {}
    for k in sorted(src):
        sub = Run(run.verb, {"judgments": src[k]}, run.base, run.out, run.seed, run.threads)
        groups[k] = annotate.read_judgments(sub.path("judgments"))
        run.inputs[f"judgments.{k}"] = sub.inputs["judgments"]
    return groups


def cmd_agreement(run: Run) -> None:
    groups = _judgment_groups(run)
    result = {}
    for g, sets in groups.items():
        for task in annotate.Task:
            mine = [j for j in sets if j.task is task]
            if not mine:
                continue
            result.setdefault(task.value, {})[g] = {
                "matching_percent": annotate.matching_percent(mine),
                "fleiss_kappa": annotate.fleiss_kappa(mine),
                "n_objects": len(mine),
            }
    cols = list(groups)
    w = 26
    lines = [
        f"{'Task':<{w}} | " + " ".join(f"{'Match% ' + c:>12}" for c in cols) + " | " + " ".join(f"{'kappa ' + c:>12}" for c in cols)
    ]
    lines.append("-" * len(lines[0]))
    names = {"text_only": "Text Only (task 1)", "text_image": "Text+Image (task 2)"}
    for task, per in result.items():
        m = " ".join(f"{per[c]['matching_percent']:>12.2f}" if c in per else f"{'-':>12}" for c in cols)
        k = " ".join(f"{per[c]['fleiss_kappa']:>12.4f}" if c in per else f"{'-':>12}" for c in cols)
        lines.append(f"{names[task]:<{w}} | {m} | {k}")
    text = "\n".join(lines) + "\n"
    run.write("agreement.txt", text)
    run.write("agreement.json", json.dumps(result, indent=2, sort_keys=True) + "\n")
    print(text, end="")


def cmd_gold(run: Run) -> None:
    sets = annotate.read_judgments(run.path("judgments"))
    t1 = [j for j in sets if j.task is annotate.Task.TEXT_ONLY]
    t2 = [j for j in sets if j.task is annotate.Task.TEXT_IMAGE]
    cats = annotate.categorize(t1, t2)
    pool_path = run.path("corpus")
    pool = [p.id for p in read_corpus(pool_path) if p.label is Label.NON_SARCASTIC]
    dist = annotate.category_distribution(cats)
    summary = {"categories": {c.value: f for c, f in dist.items()}, "gold": {}}
    for thr in run.config.get("thresholds", [0.5, 0.8, 1.0]):
        gs = annotate.build_gold(cats, t2, float(thr), pool, run.seed)
        name = f"gold_{gs.name}.json"
        run.write(name, json.dumps(gs.to_dict(), indent=2) + "\n")
        summary["gold"][gs.name] = {"positives": len(gs.positives), "negatives": len(gs.negatives)}
    run.write("categories.json", json.dumps({k: v.value for k, v in sorted(cats.items())}, indent=2) + "\n")
    run.write("gold_summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    for c, f in dist.items():
        print(f"{c.value:<14} {100 * f:6.2f}%")
    for name, s in summary["gold"].items():
        print(f"{name:<6} positives={s['positives']} negatives={s['negatives']}")


def cmd_predict(run: Run) -> None:
    model_dir = run.path("model_dir")
    meta = json.loads((model_dir / "model.json").read_text())
    posts = read_corpus(run.path("corpus"))
    vocab_lines = (model_dir / "vocab.txt").read_text(encoding="utf-8").splitlines()
    store = load_store(run)
    rows = ["id\tlabel\tscore"]
    if meta["kind"] == "svm":
        vocab = NgramVocab.from_lines(vocab_lines)
        ctx = FeatureContext(load_resources(run), store, vocab, meta["policy"])
        model = svm.load_model(model_dir / "model.svm")
        for p in posts:
            label, score = svm.predict(model, svm_features(p, meta["feature_set"], ctx))
            rows.append(f"{p.id}\t{'sarcastic' if label == 1 else 'non_sarcastic'}\t{score!r}")
    elif meta["kind"] == "net":
        vocab = NgramVocab.from_lines(vocab_lines, max_n=1)
        net, header = fusionnet.load_checkpoint(model_dir / "model.net")
        if header["vocab_hash"] != vocab.digest():
            raise ValueError("vocabulary does not match the checkpoint")
        data = net_inputs(posts, vocab, store, meta["policy"])
        proba = net.predict_proba(data.text, data.avr)
        for p, pr in zip(posts, proba):
            label = "sarcastic" if pr[1] >= pr[0] else "non_sarcastic"
            rows.append(f"{p.id}\t{label}\t{float(pr[1])!r}")
    else:
        raise ValueError(f"unknown model kind {meta['kind']!r}")
    run.write("predictions.tsv", "\n".join(rows) + "\n")
    print(f"wrote {len(posts)} predictions")


def cmd_synth(run: Run) -> None:
    c = run.config
    params = SynthParams(
        q=float(c.get("q", 0.5)),
        avr_dim=int(c.get("avr_dim", AVR_DIM)),
        avr_scale=float(c.get("avr_scale", 3.0)),
        embedding_dim=int(c.get("embedding_dim", 16)),
        platforms=tuple(c.get("platforms", ["IG"])),
        random_labels=bool(c.get("random_labels", False)),
    )
    sc = synth_incongruity_corpus(int(c.get("n", 2000)), run.seed, params)
    write_corpus(sc.posts, run.out / "corpus.jsonl")
    run.register("corpus.jsonl")
    write_concepts({i: f.detected_concepts for i, f in sc.store.images.items()}, run.out / "concepts.txt")
    run.register("concepts.txt")
    write_avr({i: f.avr for i, f in sc.store.images.items()}, run.out / "avr.txt", params.avr_dim)
    run.register("avr.txt")
    run.write("concept_vocab.txt", "\n".join(sc.store.vocab.names) + "\n")
    write_resources(sc.resources, run.out / "resources")
    for f in sorted((run.out / "resources").iterdir()):
        run.register(f"resources/{f.name}")
    run.write("image_cue.json", json.dumps(sc.image_cue, sort_keys=True) + "\n")
    print(
        f"{len(sc.posts)} posts, q={params.q}; Bayes accuracy text-only={sc.bayes_accuracy('text'):.3f} "
        f"fusion={sc.bayes_accuracy('fusion'):.3f}"
    )


COMMANDS = {
    "ingest": cmd_ingest,
    "stats": cmd_stats,
    "featurize": cmd_featurize,
    "train-svm": cmd_train_svm,
    "train-net": cmd_train_net,
    "evaluate": cmd_evaluate,
    "agreement": cmd_agreement,
    "gold": cmd_gold,
    "predict": cmd_predict,
    "synth": cmd_synth,
}


# --------------------------------------------------------------------------
# entry point


def _parse_override(s: str):
    key, sep, raw = s.partition("=")
    if not sep:
        raise UsageError(f"override {s!r} is not key=value")
    try:
        val = json.loads(raw)
    except json.JSONDecodeError:
        val = raw
    return key.split("."), val


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mmsarc", description="Multimodal sarcasm detection toolkit")
    ap.add_argument("verb", choices=VERBS)
    ap.add_argument("--config", help="JSON config file")
    ap.add_argument("--seed", type=int, help="root seed (overrides the config)")
    ap.add_argument("--out", default="out", help="output directory")
    ap.add_argument("--threads", type=int, default=1, help="worker threads for independent grid cells")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="config override (dotted keys)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def dispatch(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        config, base = {}, Path.cwd()
        if args.config:
            cfg_path = Path(args.config)
            config = json.loads(cfg_path.read_text(encoding="utf-8"))
            if not isinstance(config, dict):
                raise ValueError("config must be a JSON object")
            base = cfg_path.resolve().parent
        for o in args.set:
            keys, val = _parse_override(o)
            node = config
            for k in keys[:-1]:
                node = node.setdefault(k, {})
            node[keys[-1]] = val
        seed = args.seed if args.seed is not None else int(config.get("seed", 0))
        config["seed"] = seed
        if args.threads < 1:
            raise ValueError("--threads must be >= 1")
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        run = Run(args.verb, config, base, out, seed, args.threads)
        COMMANDS[args.verb](run)
        run.finish()
    except UsageError as exc:
        ap.print_usage(sys.stderr)
        print(f"error: usage: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, FileNotFoundError, TypeError, json.JSONDecodeError) as exc:
        msg = str(exc).replace("\n", " ")
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
