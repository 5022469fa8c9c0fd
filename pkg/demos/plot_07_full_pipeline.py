"""
Full pipeline through files
===========================

simulate -> train -> score -> first-stage fusion -> second-stage fusion ->
per-attack report, each stage reading and writing the documented formats.
The same chain is available as ``ssdetect simulate/train/score/fuse/eval``.
A reduced corpus keeps this demo quick; the shipped default config runs the
full desk-scale corpus.
"""

import sys
import tempfile

from ssdetect.config import PipelineConfig

from ssdetect.pipeline import run_demo

small = len(sys.argv) < 2 or sys.argv[1] != "--full"
cfg = PipelineConfig(num_natural=150, num_spoofed=150, num_components=16) if small \
    else PipelineConfig()
with tempfile.TemporaryDirectory() as out:
    result = run_demo(out, cfg)
    print(result["report_text"].split("\n[")[0])
