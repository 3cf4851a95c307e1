"""
 layoutforge: command line interface

 Copyright (C) 2026  layoutforge developers

 This work is licensed under the terms of the GNU GPL, version 3.  See
 the LICENSE file in the top-level directory.
"""
import os
import sys
import json
import asyncio
import logging
import argparse
from dataclasses import replace

import aiohttp
import numpy as np

from liblayoutforge import engine, evaluate, imaging, lib, reconstruct, synthgen
from liblayoutforge.config import DOC_TYPES, load_config
from liblayoutforge.docmodel import DocumentTree
from liblayoutforge.errors import LayoutForgeError, ValidationError
from liblayoutforge.pipeline import Pipeline, ServiceConfig
from liblayoutforge.service import ServiceClient, serve
from liblayoutforge.version import VERSION

log = logging.getLogger(__name__)

DEFAULT_URL = "http://127.0.0.1:8080"


def _doc_type(value):
    if value not in DOC_TYPES + ("unknown",):
        raise argparse.ArgumentTypeError(f"invalid document type: {value}")
    return value


def build_parser():
    """Argument parser with one subcommand per operation"""
    parser = argparse.ArgumentParser(
        prog="layoutforge",
        description="Rule based document layout analysis, recognition and reconstruction",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {VERSION}")
    parser.add_argument("--debug", action="store_true", help="Show debug output")
    parser.add_argument("--syslog", action="store_true", help="Log to local syslog")
    parser.add_argument("--logfile", type=str, default="", help="Log to file")
    sub = parser.add_subparsers(dest="command", title="commands")
    sub.required = True

    def document(cmd, help_text):
        cmd_parser = sub.add_parser(cmd, help=help_text)
        cmd_parser.add_argument("input", help="PNG or PDF source")
        cmd_parser.add_argument("--out", required=True, help="Output directory")
        cmd_parser.add_argument("--doc-type", type=_doc_type, default="unknown", help="Document type profile")
        cmd_parser.add_argument("--config", default=None, help="Rule configuration JSON file")
        cmd_parser.add_argument("--dpi", type=int, default=None, help="PDF rasterization dpi")
        cmd_parser.add_argument("--workers", type=int, default=1, help="Pages processed in parallel")
        cmd_parser.add_argument("--source-id", default=None, help="Document id, defaults to the file name")
        cmd_parser.add_argument("--atlas", default=None, help="Glyph atlas directory, procedural atlas if unset")
        return cmd_parser

    process = document("process", "Full pipeline, rendered output")
    process.add_argument("--format", choices=reconstruct.FORMATS, default="json", help="Output format")
    process.add_argument("--text-cell-px", type=int, default=None, help="Text grid cell width")
    document("layout", "Layout analysis, layout JSON and region overlays")

    synth = sub.add_parser("synth", help="Render a synthetic page with ground truth")
    spec_source = synth.add_mutually_exclusive_group(required=True)
    spec_source.add_argument("--spec", help="Page spec JSON file")
    spec_source.add_argument("--seed", type=int, help="Generate a random page spec from a seed")
    synth.add_argument("--columns", type=int, choices=(1, 2), default=None, help="Columns of a random spec")
    synth.add_argument("--out", required=True, help="Output directory")
    synth.add_argument("--source-id", default="page", help="Document id of the ground truth")
    synth.add_argument("--atlas", default=None, help="Glyph atlas directory, overrides the one of the spec")

    ev = sub.add_parser("eval", help="Accuracy report")
    ev.add_argument("--gt", help="Ground truth directory")
    ev.add_argument("--pred", help="Prediction directory")
    ev.add_argument("--scores", help="JSON map of document type to [cm, lev] percentages")
    ev.add_argument("--json", action="store_true", help="Emit the report as JSON")
    ev.add_argument("--no-whitespace", action="store_true", help="Exclude whitespace from confusion counts")

    srv = sub.add_parser("serve", help="Run the job service")
    srv.add_argument("--listen", default=None, help="host:port")
    srv.add_argument("--workers", type=int, default=None, help="Worker threads")
    srv.add_argument("--queue-dir", default=None, help="Durable queue directory")
    srv.add_argument("--dpi", type=int, default=None, help="PDF rasterization dpi")
    srv.add_argument("--max-retries", type=int, default=None, help="Retries per page task")
    srv.add_argument("--config", default=None, help="Rule configuration JSON file")
    srv.add_argument("--atlas", default=None, help="Glyph atlas directory, procedural atlas if unset")

    submit = sub.add_parser("submit", help="Submit a document to the job service")
    submit.add_argument("input", help="PNG or PDF source")
    submit.add_argument("--doc-type", type=_doc_type, default="unknown", help="Document type hint")
    submit.add_argument("--url", default=DEFAULT_URL, help="Service url")

    status = sub.add_parser("status", help="Status of a job")
    status.add_argument("job_id")
    status.add_argument("--url", default=DEFAULT_URL, help="Service url")

    result = sub.add_parser("result", help="Result of a finished job")
    result.add_argument("job_id")
    result.add_argument("--format", choices=reconstruct.FORMATS, default="json", help="Output format")
    result.add_argument("--out", default=None, help="Output file, stdout if unset")
    result.add_argument("--url", default=DEFAULT_URL, help="Service url")
    return parser


def rule_config(args):
    """Defaults, config file, document type profile, explicit flags"""
    config = load_config(getattr(args, "config", None))
    config = config.for_doc_type(getattr(args, "doc_type", "unknown"))
    if getattr(args, "dpi", None):
        config = replace(config, dpi=args.dpi)
    return config


def _analyze(args, config):
    data, fmt = imaging.read_source(args.input)
    pages = imaging.rasterize(data, fmt, config.dpi)
    source_id = args.source_id or os.path.splitext(os.path.basename(args.input))[0]
    page_engine = engine.Engine(config, atlas=engine.load_atlas(args.atlas))
    return page_engine.process_document(pages, source_id, max(1, args.workers))


def cmd_process(args):
    """Full pipeline into the output directory"""
    config = rule_config(args)
    doc, results = _analyze(args, config)
    opts = reconstruct.RenderOptions(format=args.format, text_cell_px=args.text_cell_px)
    engine.export_document(doc, results, args.out, opts, config)
    return 0


def cmd_layout(args):
    """Layout JSON and overlays"""
    config = rule_config(args)
    doc, results = _analyze(args, config)
    engine.export_layout(doc, results, args.out)
    return 0


def cmd_synth(args):
    """Render a synthetic page with its ground truth files"""
    atlas = engine.load_atlas(args.atlas)
    if args.spec:
        spec = synthgen.load_spec(args.spec)
    else:
        spec = synthgen.random_spec(args.seed, atlas, args.columns)
    if args.atlas:
        spec = replace(spec, atlas=os.path.abspath(args.atlas))
    page = synthgen.render_page(spec, atlas, args.source_id)
    out = args.out
    lib.write_file(os.path.join(out, "page.png"), lib.png_bytes(page.image))
    lib.write_file(
        os.path.join(out, "truth.json"),
        reconstruct.to_layout_json(DocumentTree((page.truth,), args.source_id)),
    )
    lib.write_file(os.path.join(out, "truth.txt"), page.text + "\n")
    # mask is in clean page coordinates, before rotation or homography
    lib.write_file(
        os.path.join(out, "mask.png"), lib.png_bytes(np.where(page.ink, 255, 0).astype(np.uint8))
    )
    lib.write_file(
        os.path.join(out, "spec.json"),
        json.dumps(synthgen.spec_to_dict(spec), ensure_ascii=False, indent=2) + "\n",
    )
    log.info("Rendered synthetic page into [%s]", out)
    return 0


def _read_scores(path):
    try:
        with open(path, "r", encoding="utf-8") as scores_file:
            values = json.load(scores_file)
        return {t: (float(v[0]), float(v[1])) for t, v in values.items()}
    except (OSError, ValueError, TypeError, IndexError, AttributeError) as errmsg:
        raise ValidationError(f"Unable to read scores [{path}]: [{errmsg}]") from errmsg


def cmd_eval(args):
    """Print an accuracy report"""
    if args.scores:
        report = evaluate.build_report(_read_scores(args.scores))
    else:
        report = evaluate.evaluate_corpus(args.gt, args.pred, not args.no_whitespace)
    sys.stdout.write(report.to_json() if args.json else report.to_text())
    return 0


def cmd_serve(args):
    """Run the job service until interrupted"""
    service = ServiceConfig.from_env(
        listen=args.listen,
        workers=args.workers,
        queue_dir=args.queue_dir,
        dpi=args.dpi,
        max_retries=args.max_retries,
    )
    serve(Pipeline(service, load_config(args.config), atlas=engine.load_atlas(args.atlas)))
    return 0


def cmd_submit(args):
    """Submit a document, print its job id"""
    data, fmt = imaging.read_source(args.input)
    client = ServiceClient(args.url)
    job_id = asyncio.run(client.submit(data, fmt, args.doc_type, os.path.basename(args.input)))
    print(job_id)
    return 0


def cmd_status(args):
    """Print the status of a job"""
    status = asyncio.run(ServiceClient(args.url).status(args.job_id))
    print(lib.json_pp(status))
    return 0


def cmd_result(args):
    """Write the result of a job"""
    body = asyncio.run(ServiceClient(args.url).result(args.job_id, args.format))
    if args.out:
        lib.write_file(args.out, body)
    else:
        sys.stdout.buffer.write(body)
    return 0


COMMANDS = {
    "process": cmd_process,
    "layout": cmd_layout,
    "synth": cmd_synth,
    "eval": cmd_eval,
    "serve": cmd_serve,
    "submit": cmd_submit,
    "status": cmd_status,
    "result": cmd_result,
}


def main(argv=None):
    """Parse arguments and dispatch; returns the exit code"""
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "eval" and not args.scores and not (args.gt and args.pred):
        parser.error("eval needs --gt and --pred, or --scores")
    lib.setup_log(args)
    try:
        return COMMANDS[args.command](args)
    except (LayoutForgeError, RuntimeError) as errmsg:
        log.error("%s", errmsg)
        return 1
    except aiohttp.ClientError as errmsg:
        log.error("Unable to reach service: [%s]", errmsg)
        return 1
    except KeyboardInterrupt:
        return 1
