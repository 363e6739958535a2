"""Command-line interface.

    mwalign train     --langs en=en.vec,de=de.vec --target en --out run/
    mwalign evaluate  --checkpoint run/best.ckpt --manifest run/manifest.txt --dict en-de=dict.txt
    mwalign translate --checkpoint run/best.ckpt --manifest run/manifest.txt --src de --tgt en -k 5
    mwalign synth     --out synth/ --n-langs 4

Training options come from defaults, then a flat ``key=value`` config file
(``--config``), then command-line flags; later sources win. Every run writes
``manifest.txt`` in the same format, so ``train --config run/manifest.txt``
repeats it. Exit status: 0 success, 2 usage or input error, 3 failure
during training or evaluation.
"""
import argparse
import logging
import os
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .embeddings import load_text_embeddings
from .errors import ArgumentError, IoError, MwalignError, ParseError
from .evaluation import (evaluate_clws, load_dictionary, load_similarity, precision_table_csv,
                         precision_table_text, word_translation_precision)
from .mat import LOG_COLUMNS, MappingSet, MatConfig, write_log_csv
from .mpsr import MpsrConfig
from .pipeline import PairTable, run_baseline_comparison, supervised_procrustes, train_joint

logger = logging.getLogger("mwalign")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 2, 3
TRAIN_MODES = ("multilingual", "pivot", "direct", "supervised-procrustes")


class UsageError(MwalignError):
    pass


# ---------------------------------------------------------------- config

def _parse_value(kind, text):
    if kind is bool:
        low = str(text).strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise UsageError(f"not a boolean: {text!r}")
    if kind is tuple:
        return tuple(int(v) for v in str(text).split(",") if v.strip())
    try:
        return kind(text)
    except ValueError:
        raise UsageError(f"cannot parse {text!r} as {kind.__name__}") from None


def _field_types(cls):
    defaults = cls()
    return {f.name: type(getattr(defaults, f.name)) for f in fields(cls)}


MAT_TYPES = _field_types(MatConfig)
MPSR_TYPES = _field_types(MpsrConfig)


def parse_langs(text):
    """``en=a.vec,de=b.vec`` -> ordered {code: path}."""
    out = {}
    for item in str(text).split(","):
        item = item.strip()
        if not item:
            continue
        if "=" not in item:
            raise UsageError(f"language entry {item!r} is not code=path")
        code, path = item.split("=", 1)
        if code in out:
            raise UsageError(f"language {code!r} given twice")
        out[code.strip()] = path.strip()
    return out


def format_langs(langs):
    return ",".join(f"{c}={p}" for c, p in langs.items())


@dataclass
class RunConfig:
    langs: dict = field(default_factory=dict)
    target: str = ""
    mode: str = "multilingual"
    out: str = "run"
    seed: int = 0
    skip_mpsr: bool = False
    max_vocab: int = 200000
    train_dicts: dict = field(default_factory=dict)
    mat: MatConfig = field(default_factory=MatConfig)
    mpsr: MpsrConfig = field(default_factory=MpsrConfig)

    def validate(self, check_paths=True):
        if len(self.langs) < 2:
            raise UsageError("need at least two languages (--langs code=path,...)")
        if not self.target:
            self.target = next(iter(self.langs))
        if self.target not in self.langs:
            raise UsageError(f"target {self.target!r} is not in the language list {list(self.langs)}")
        if self.mode not in TRAIN_MODES:
            raise UsageError(f"mode must be one of {TRAIN_MODES}")
        if check_paths:
            for code, p in list(self.langs.items()) + list(self.train_dicts.items()):
                if not os.path.isfile(p):
                    raise UsageError(f"{code}: no such file {p}")
        if self.mode == "supervised-procrustes":
            for code in self.langs:
                if code != self.target and f"{code}-{self.target}" not in self.train_dicts:
                    raise UsageError(f"supervised mode needs --train-dict {code}-{self.target}=PATH")
        return self

    def items(self):
        """Flat ``(key, value-string)`` pairs covering every setting."""
        yield "langs", format_langs(self.langs)
        yield "target", self.target
        yield "mode", self.mode
        yield "out", self.out
        yield "seed", str(self.seed)
        yield "skip_mpsr", str(self.skip_mpsr).lower()
        yield "max_vocab", str(self.max_vocab)
        if self.train_dicts:
            yield "train_dicts", format_langs(self.train_dicts)
        for prefix, obj in (("mat_", self.mat), ("mpsr_", self.mpsr)):
            for f in fields(obj):
                v = getattr(obj, f.name)
                yield prefix + f.name, ",".join(map(str, v)) if isinstance(v, tuple) else str(v).lower() \
                    if isinstance(v, bool) else str(v)

    def to_text(self):
        return "".join(f"{k}={v}\n" for k, v in self.items())


def read_config_file(path):
    """Flat ``key=value`` lines; ``#`` starts a comment."""
    values = {}
    try:
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ParseError("expected key=value", path, lineno)
                k, v = line.split("=", 1)
                values[k.strip()] = v.strip()
    except OSError as e:
        raise UsageError(f"cannot read config {path}: {e}") from e
    return values


def build_run_config(values):
    """RunConfig from flat string settings (unknown keys are an error)."""
    cfg = RunConfig()
    mat, mpsr = {}, {}
    seed_given = "seed" in values
    for key, raw in values.items():
        if raw is None:
            continue
        if key == "langs":
            cfg.langs = parse_langs(raw)
        elif key == "train_dicts":
            cfg.train_dicts = parse_langs(raw)
        elif key in ("target", "mode", "out"):
            setattr(cfg, key, str(raw))
        elif key in ("seed", "max_vocab"):
            setattr(cfg, key, _parse_value(int, raw))
        elif key == "skip_mpsr":
            cfg.skip_mpsr = _parse_value(bool, raw)
        elif key.startswith("mat_") and key[4:] in MAT_TYPES:
            mat[key[4:]] = _parse_value(MAT_TYPES[key[4:]], raw)
        elif key.startswith("mpsr_") and key[5:] in MPSR_TYPES:
            mpsr[key[5:]] = _parse_value(MPSR_TYPES[key[5:]], raw)
        else:
            raise UsageError(f"unknown setting {key!r}")
    if seed_given:
        mat.setdefault("seed", cfg.seed)
        mpsr.setdefault("seed", cfg.seed)
    try:
        cfg.mat = MatConfig(**mat)
        cfg.mpsr = MpsrConfig(**mpsr)
    except ArgumentError as e:
        raise UsageError(str(e)) from e
    return cfg


# ---------------------------------------------------------------- io helpers

def load_spaces(langs, max_vocab):
    return [load_text_embeddings(p, max_vocab=max_vocab, lang=code) for code, p in langs.items()]


def parse_pair_files(items, what):
    """``["en-de=path", ...]`` -> {("en", "de"): path}."""
    out = {}
    for item in items or ():
        for part in item.split(","):
            if not part.strip():
                continue
            if "=" not in part or "-" not in part.split("=", 1)[0]:
                raise UsageError(f"{what} entry {part!r} is not src-tgt=path")
            pair, path = part.split("=", 1)
            s, t = pair.split("-", 1)
            if not os.path.isfile(path):
                raise UsageError(f"{what} {pair}: no such file {path}")
            out[(s.strip(), t.strip())] = path.strip()
    return out


def save_pair_table(table, directory):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for (s, t), (a, b) in table.encoders.items():
        ms = MappingSet([table.langs[s], table.langs[t]], 1, [a, b])
        save_checkpoint(ms, directory / f"{table.langs[s]}-{table.langs[t]}.ckpt")


def load_model(path):
    """A checkpoint file, or a directory of per-pair checkpoints, as a PairTable."""
    p = Path(path)
    if p.is_dir():
        files = sorted(p.glob("*.ckpt"))
        if not files:
            raise UsageError(f"no *.ckpt files in {p}")
        langs, enc = [], {}
        for f in files:
            ms = load_checkpoint(f)
            for l in ms.langs:
                if l not in langs:
                    langs.append(l)
            enc[(langs.index(ms.langs[0]), langs.index(ms.langs[1]))] = (ms.maps[0], ms.maps[1])
        return PairTable(langs, enc)
    if not p.is_file():
        raise UsageError(f"no such checkpoint {p}")
    return PairTable.from_mappings(load_checkpoint(p))


def resolve_langs(args):
    if args.langs:
        return parse_langs(args.langs)
    if args.manifest:
        values = read_config_file(args.manifest)
        if "langs" not in values:
            raise UsageError(f"manifest {args.manifest} has no langs entry")
        return parse_langs(values["langs"])
    raise UsageError("give --langs or --manifest")


# ---------------------------------------------------------------- commands

def cmd_train(cfg):
    cfg.validate()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.txt").write_text(cfg.to_text())
    spaces = load_spaces(cfg.langs, cfg.max_vocab)
    codes = list(cfg.langs)
    target = codes.index(cfg.target)
    if cfg.mode == "multilingual":
        res = train_joint(spaces, cfg.mat, cfg.mpsr, target=target, skip_mpsr=cfg.skip_mpsr)
        save_checkpoint(res.mappings, out / "best.ckpt")
        log = list(res.mat.log)
        last = log[-1].step if log else 0
        for rec in (res.mpsr.log[1:] if res.mpsr else []):
            # refinement epochs continue the numbering after the adversarial ones
            log.append(replace(rec, epoch=len(res.mat.log) + rec.epoch, step=last + rec.step))
        columns = LOG_COLUMNS
        if cfg.mat.track_orthogonality or cfg.mpsr.track_orthogonality:
            columns = LOG_COLUMNS + ["max_residual"]
        write_log_csv(log, out / "log.csv", columns)
        logger.info("trained %d languages in %.1fs", len(spaces), res.seconds)
    elif cfg.mode in ("pivot", "direct"):
        res = run_baseline_comparison(spaces, cfg.mode, cfg.mat, cfg.mpsr, pivot=target, skip_mpsr=cfg.skip_mpsr)
        save_pair_table(res.table, out / "pairs")
        (out / "cost.txt").write_text(f"mode={res.mode}\nbwes={res.cost_bwes}\nseconds={res.seconds:.3f}\n")
    else:
        dicts = {}
        for pair, p in cfg.train_dicts.items():
            s, t = pair.split("-", 1)
            dicts[(codes.index(s), codes.index(t))] = load_dictionary(p, s, t)
        save_checkpoint(supervised_procrustes(spaces, dicts, target), out / "best.ckpt")
    return EXIT_OK


def _table_index(table, code):
    if code not in table.langs:
        raise UsageError(f"language {code!r} not in checkpoint {table.langs}")
    return table.langs.index(code)


def pair_encoders(table, s, t):
    """(A, B) for the language codes s and t; a language against itself uses the identity."""
    i, j = _table_index(table, s), _table_index(table, t)
    if i == j:
        dim = next(iter(table.encoders.values()))[0].shape[0]
        return np.eye(dim), np.eye(dim)
    if (i, j) not in table.encoders:
        raise UsageError(f"checkpoint has no mapping for {s}-{t}")
    return table.encoders[(i, j)]


def cmd_evaluate(args):
    langs = resolve_langs(args)
    table = load_model(args.checkpoint)
    dict_files = parse_pair_files(args.dict, "dictionary")
    sim_files = parse_pair_files(args.similarity, "similarity file")
    if not dict_files and not sim_files:
        raise UsageError("nothing to evaluate: give --dict and/or --similarity")
    needed = {c for pair in list(dict_files) + list(sim_files) for c in pair}
    missing = needed - set(langs)
    if missing:
        raise UsageError(f"no embeddings for {sorted(missing)}")
    spaces = {s.lang: s for s in load_spaces({c: langs[c] for c in langs if c in needed}, args.max_vocab)}
    dim = next(iter(table.encoders.values()))[0].shape[0]
    for s in spaces.values():
        if s.dim != dim:
            raise UsageError(f"{s.lang} embeddings have dim {s.dim}, checkpoint has {dim}")
    out = Path(args.out) if args.out else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
    report = []
    if dict_files:
        precision, coverage = {}, {}
        for (s, t), path in sorted(dict_files.items()):
            d = load_dictionary(path, s, t)
            a, b = pair_encoders(table, s, t)
            r = word_translation_precision(d, spaces[s], spaces[t], a, b, k_list=(1,), csls_n=args.csls_n)
            precision[(s, t)], coverage[(s, t)] = r.precision[1], r.coverage
        order = [c for c in table.langs if any(c in p for p in precision)]
        report.append("Word translation precision@1 (%)\n" + precision_table_text(order, precision))
        if out:
            (out / "precision.csv").write_text(precision_table_csv(precision, coverage))
    if sim_files:
        lines = [f"{'pair':<10}{'rho':>8}{'coverage':>10}"]
        for (s, t), path in sorted(sim_files.items()):
            ds = load_similarity(path, s, t)
            a, b = pair_encoders(table, s, t)
            r = evaluate_clws(ds, spaces[s], spaces[t], a, b)
            lines.append(f"{s + '-' + t:<10}{r.rho:>8.3f}{r.coverage:>10.3f}")
        report.append("Cross-lingual word similarity (Spearman)\n" + "\n".join(lines))
        if out:
            (out / "similarity.txt").write_text("\n".join(lines) + "\n")
    text = "\n\n".join(report)
    if out:
        (out / "report.txt").write_text(text + "\n")
    print(text)
    return EXIT_OK


def cmd_translate(args):
    from .evaluation import shared_space, translation_predictions

    langs = resolve_langs(args)
    table = load_model(args.checkpoint)
    for c in (args.src, args.tgt):
        if c not in langs:
            raise UsageError(f"no embeddings for {c!r}")
    a, b = pair_encoders(table, args.src, args.tgt)
    src = load_text_embeddings(langs[args.src], max_vocab=args.max_vocab, lang=args.src)
    tgt = src if args.src == args.tgt else load_text_embeddings(langs[args.tgt], max_vocab=args.max_vocab,
                                                                 lang=args.tgt)
    if args.k < 1 or args.k > len(tgt):
        raise UsageError(f"-k must be in [1, {len(tgt)}]")
    words = [w for w in (line.strip() for line in args.input) if w]
    rows = [src.vocab.get(w) for w in words]
    known = [r for r in rows if r is not None]
    res = None
    if known:
        res = translation_predictions(shared_space(src, a), shared_space(tgt, b), np.asarray(known), args.k,
                                      args.csls_n)
    q = 0
    out = sys.stdout
    for w, r in zip(words, rows):
        if r is None:
            out.write(f"{w}\t<OOV>\n")
            continue
        cells = [w]
        for idx, score in zip(res.indices[q], res.scores[q]):
            cells += [tgt.vocab.words[idx], f"{score:.6f}"]
        out.write("\t".join(cells) + "\n")
        q += 1
    return EXIT_OK


def cmd_synth(args):
    from .synthetic import ClusterSpec, generate_family

    cluster = None
    if args.cluster:
        members = tuple(int(m) for m in args.cluster.split(","))
        cluster = ClusterSpec(members, args.cluster_strength, args.cluster_fraction)
    fam = generate_family(args.n_langs, args.vocab, args.dim, args.sigma, args.seed, cluster_spec=cluster,
                          rotation_scale=args.rotation_scale, latent=args.latent)
    paths = fam.export(args.out)
    print(format_langs({k: str(v) for k, v in paths.items()}))
    return EXIT_OK


# ---------------------------------------------------------------- argparse

def _add_config_flags(p):
    for prefix, types, title in (("mat", MAT_TYPES, "adversarial stage"), ("mpsr", MPSR_TYPES, "refinement stage")):
        g = p.add_argument_group(title)
        for name in types:
            g.add_argument(f"--{prefix}-{name.replace('_', '-')}", dest=f"{prefix}_{name}", default=None,
                           metavar="V")


def build_parser():
    ap = argparse.ArgumentParser(prog="mwalign", description="Unsupervised multilingual embedding alignment")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="learn mappings")
    t.add_argument("--config", help="flat key=value settings file")
    t.add_argument("--langs", help="code=path,... (embedding text files)")
    t.add_argument("--target", help="language whose space is shared (also the pivot)")
    t.add_argument("--mode", choices=TRAIN_MODES)
    t.add_argument("--out")
    t.add_argument("--seed")
    t.add_argument("--max-vocab", dest="max_vocab")
    t.add_argument("--skip-mpsr", dest="skip_mpsr", action="store_const", const="true")
    t.add_argument("--train-dict", dest="train_dicts", action="append", help="src-tgt=path (supervised mode)")
    _add_config_flags(t)

    for name, helptext in (("evaluate", "score a checkpoint"), ("translate", "nearest-neighbour translation")):
        e = sub.add_parser(name, help=helptext)
        e.add_argument("--checkpoint", required=True, help="checkpoint file or directory of pair checkpoints")
        e.add_argument("--langs", help="code=path,...")
        e.add_argument("--manifest", help="take embedding paths from a training manifest")
        e.add_argument("--max-vocab", dest="max_vocab", type=int, default=200000)
        e.add_argument("--csls-n", dest="csls_n", type=int, default=10)
        if name == "evaluate":
            e.add_argument("--dict", action="append", help="src-tgt=path (repeatable)")
            e.add_argument("--similarity", action="append", help="l1-l2=path, word1<TAB>word2<TAB>score")
            e.add_argument("--out", help="directory for report files")
        else:
            e.add_argument("--src", required=True)
            e.add_argument("--tgt", required=True)
            e.add_argument("-k", type=int, default=1)
            e.add_argument("--input", type=argparse.FileType("r"), default=sys.stdin)

    s = sub.add_parser("synth", help="write a synthetic language family")
    s.add_argument("--out", required=True)
    s.add_argument("--n-langs", dest="n_langs", type=int, default=4)
    s.add_argument("--vocab", type=int, default=2000)
    s.add_argument("--dim", type=int, default=32)
    s.add_argument("--sigma", type=float, default=0.01)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--rotation-scale", dest="rotation_scale", type=float, default=None)
    s.add_argument("--latent", choices=("gaussian", "clustered"), default="gaussian")
    s.add_argument("--cluster", help="comma-separated member indices sharing an extra rotation")
    s.add_argument("--cluster-strength", dest="cluster_strength", type=float, default=0.3)
    s.add_argument("--cluster-fraction", dest="cluster_fraction", type=float, default=0.5)
    return ap


def train_config_from_args(args):
    values = read_config_file(args.config) if args.config else {}
    flags = {k: v for k, v in vars(args).items()
             if v is not None and k not in ("command", "config", "verbose", "train_dicts")}
    if args.train_dicts:
        flags["train_dicts"] = ",".join(args.train_dicts)
    values.update(flags)
    return build_run_config(values)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        if args.command == "train":
            return cmd_train(train_config_from_args(args))
        if args.command == "evaluate":
            return cmd_evaluate(args)
        if args.command == "translate":
            return cmd_translate(args)
        return cmd_synth(args)
    except (UsageError, ParseError, ArgumentError, IoError) as e:
        print(f"mwalign: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (MwalignError, FloatingPointError) as e:
        print(f"mwalign: {args.command} failed: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
