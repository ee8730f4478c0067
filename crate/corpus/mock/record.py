#!/usr/bin/env python3
"""Rebuild llm.json: replay each program against the current transcript, and
every time the mock misses, bind the missing prompt hash to the next scripted
response. The first response per program is deliberately partial so that the
refinement prompt is exercised.

Run from the repository root after `cargo build --release`. Any change to the
prompt templates changes the hashes, so rerun this afterwards.
"""
import json
import re
import subprocess

RESPONSES = {
    "two-counters": ["```\nx <= n\nx < n\n```", "Relating the counters:\n```\nx == y\nx <= n\n```"],
    "double-step": ["```\nx <= n\ns >= 0\nx < n\n```", "```\ns == 2*x\nx <= n\n```"],
    "sum-transfer": ["```\nx >= 0\ny <= n\n```", "The sum is conserved.\n```\nx + y == n\nx >= 0\n```"],
}
PATH = "corpus/mock/llm.json"
MISS = re.compile(r"no response for prompt ([0-9a-f]{64})")


def save(mock):
    with open(PATH, "w") as f:
        json.dump(mock, f, indent=2, sort_keys=True)
        f.write("\n")


def main():
    mock = {}
    for prog, script in RESPONSES.items():
        step = 0
        while True:
            save(mock)
            cmd = ["target/release/pathinv", "--json", "infer", f"corpus/{prog}.mc", "--mode", "llm", "--mock", PATH]
            out = subprocess.run(cmd, capture_output=True, text=True).stdout
            miss = MISS.search(out)
            if not miss:
                print(prog, json.loads(out)["totals"]["verdict"])
                break
            mock[miss.group(1)] = script[min(step, len(script) - 1)]
            step += 1
    save(mock)


if __name__ == "__main__":
    main()
