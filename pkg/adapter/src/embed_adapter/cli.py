"""Command line for the embedding and cluster exporter.

Exit codes: 0 success, 1 flag or configuration misuse, 2 data or model
failure (including an encoder that cannot be loaded).
"""

import argparse
import sys

from . import __version__
from .adapter import AdapterConfig, export_clusters, export_embeddings
from .encoders import DEFAULT_MODEL
from .errors import AdapterError, UsageError


class _Parser(argparse.ArgumentParser):
    # argparse exits directly on error; route through our exit-code mapping
    def error(self, message):
        raise UsageError(message)


def _add_common(p) -> None:
    p.add_argument("--corpus", required=True, help="input corpus JSONL")
    p.add_argument(
        "--model",
        default=DEFAULT_MODEL,
        help="encoder name; 'hashed-<width>' runs offline (default: %(default)s)",
    )
    p.add_argument("--batch-size", type=int, default=32, help="documents per encode call")


def build_parser() -> argparse.ArgumentParser:
    top = _Parser(prog="embed-adapter", description=__doc__.splitlines()[0])
    top.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = top.add_subparsers(dest="command")

    embed = sub.add_parser("embed", help="write unit-normalized document embeddings")
    _add_common(embed)
    embed.add_argument("--out", required=True, help="output embedding file")

    cluster = sub.add_parser("cluster", help="write a cluster-assignment JSON")
    _add_common(cluster)
    cluster.add_argument("--out", required=True, help="output clustering file")
    cluster.add_argument("--clusters", type=int, required=True, help="cluster count")
    cluster.add_argument("--seed", type=int, default=0, help="clustering seed")
    return top


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("pick a command: embed or cluster")
        if args.command == "embed":
            cfg = AdapterConfig(
                model=args.model,
                batch_size=args.batch_size,
                corpus_path=args.corpus,
                embeddings_path=args.out,
            )
            n = export_embeddings(cfg)
            print(f"wrote {n} embeddings to {args.out}")
        else:
            cfg = AdapterConfig(
                model=args.model,
                batch_size=args.batch_size,
                corpus_path=args.corpus,
                clusters_path=args.out,
                clusters=args.clusters,
                seed=args.seed,
            )
            assignments = export_clusters(cfg)
            print(
                f"wrote {len(assignments)} assignments over "
                f"{args.clusters} clusters to {args.out}"
            )
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (AdapterError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
