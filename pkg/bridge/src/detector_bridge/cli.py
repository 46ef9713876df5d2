"""bridge: export detector outputs into the counting pipeline's formats."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .convert import (
    DEFAULT_LABEL,
    ConversionError,
    LabelmeDocument,
    convert_labelme,
    export_detections,
    load_dump,
)


def cmd_export(args) -> int:
    dump = load_dump(args.dump)
    ordering = None
    if args.frame_order:
        ordering = Path(args.frame_order).read_text().split()
    data = export_detections(dump, ordering, video=args.video)
    Path(args.out).write_bytes(data)
    print(f"wrote {args.out}")
    return 0


def cmd_labelme(args) -> int:
    root = Path(args.input)
    if not root.is_dir():
        raise ConversionError(f"annotation directory not found: {root}")
    paths = sorted(root.glob("*.json"))
    if not paths:
        raise ConversionError(f"no labelme documents in {root}")
    docs = [LabelmeDocument.load(p) for p in paths]
    data = convert_labelme(docs, label=args.label, video=args.video)
    Path(args.out).write_bytes(data)
    print(f"wrote {args.out}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="bridge",
        description="Convert prediction dumps and labelme annotations to "
                    "the counting pipeline's JSON formats.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("export", help="prediction dump -> detections JSON")
    p.add_argument("--dump", required=True,
                   help="dump JSON file or directory of per-image JSONs")
    p.add_argument("--out", required=True)
    p.add_argument("--frame-order",
                   help="whitespace-separated image names fixing frame indices")
    p.add_argument("--video", default="export")
    p.set_defaults(fn=cmd_export)

    p = sub.add_parser("labelme", help="labelme documents -> ground truth JSON")
    p.add_argument("--in", dest="input", required=True,
                   help="directory of labelme JSON documents")
    p.add_argument("--out", required=True)
    p.add_argument("--label", default=DEFAULT_LABEL)
    p.add_argument("--video", default="labelme")
    p.set_defaults(fn=cmd_labelme)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConversionError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception as e:
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
