"""Seeded decoding simulator: a uniform random sampler plays the LLM.

Each run decodes tokens until end-of-sequence is sampled, the step cap is
hit, or no token is viable (a stuck state, reported rather than raised).
When a class table is supplied the run computes both the naive and the
compressed mask at every step, times them, and records whether the
expanded compressed mask is bit-identical to the naive one; sampling
always uses the naive mask so a mismatch cannot silently steer a run.
"""

from __future__ import annotations

import json
import random
import time
from dataclasses import dataclass, field

import numpy as np

from .classtable import ClassTable, Vocabulary, expand_class_mask
from .engine import commit_token, compute_mask_compressed, compute_mask_naive, new_state
from .grammar import Cfg


@dataclass(frozen=True)
class FuzzConfig:
    seed: int = 0
    steps: int = 100  # max tokens per run
    runs: int = 1

    def __post_init__(self):
        if self.steps < 1 or self.runs < 1:
            raise ValueError("steps and runs must be at least 1")


@dataclass
class StepRecord:
    index: int
    state_digest: str
    sampled_token: int | None
    allowed_count: int
    masks_equal: bool | None
    naive_ns: int
    compressed_ns: int | None

    def to_json(self) -> dict:
        return {
            "step": self.index,
            "state": self.state_digest,
            "token": self.sampled_token,
            "allowed": self.allowed_count,
            "masks_equal": self.masks_equal,
            "naive_ns": self.naive_ns,
            "compressed_ns": self.compressed_ns,
        }


@dataclass
class RunReport:
    seed: int
    run_index: int
    outcome: str  # "completed" | "stuck" | "truncated"
    output: bytes
    steps: list[StepRecord]
    first_mismatch: dict | None = None

    @property
    def mismatches(self) -> int:
        return sum(1 for s in self.steps if s.masks_equal is False)

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "run": self.run_index,
            "outcome": self.outcome,
            "output_hex": self.output.hex(),
            "steps": len(self.steps),
            "mismatches": self.mismatches,
            "first_mismatch": self.first_mismatch,
        }


@dataclass
class FuzzReport:
    config: FuzzConfig
    runs: list[RunReport] = field(default_factory=list)

    @property
    def total_steps(self) -> int:
        return sum(len(r.steps) for r in self.runs)

    @property
    def total_mismatches(self) -> int:
        return sum(r.mismatches for r in self.runs)

    def mask_times_ns(self, exclude_stuck: bool = True) -> tuple[list[int], list[int]]:
        """Per-step (naive, compressed) mask times; stuck runs excluded by
        default so degenerate states cannot skew latency aggregates."""
        naive: list[int] = []
        compressed: list[int] = []
        for run in self.runs:
            if exclude_stuck and run.outcome == "stuck":
                continue
            for s in run.steps:
                naive.append(s.naive_ns)
                if s.compressed_ns is not None:
                    compressed.append(s.compressed_ns)
        return naive, compressed

    def to_jsonl(self) -> str:
        lines = [json.dumps(r.to_json(), sort_keys=True) for r in self.runs]
        return "\n".join(lines) + "\n" if lines else ""


def fuzz_decode(
    g: Cfg,
    vocab: Vocabulary,
    tbl: ClassTable | None,
    cfg: FuzzConfig,
    stop_after_steps: int | None = None,
) -> FuzzReport:
    """Run ``cfg.runs`` seeded decoding runs of up to ``cfg.steps`` tokens.

    Identical inputs give identical reports (wall times aside).  With a
    class table, every step checks expanded-compressed == naive.
    ``stop_after_steps`` skips remaining runs once that many steps have
    accumulated (runs are seeded independently, so this stays deterministic).
    """
    root = new_state(g)
    report = FuzzReport(config=cfg)
    for ri in range(cfg.runs):
        if stop_after_steps is not None and report.total_steps >= stop_after_steps:
            break
        rng = random.Random(cfg.seed * 1_000_003 + ri)
        state = root
        out = bytearray()
        steps: list[StepRecord] = []
        outcome = "truncated"
        first_mismatch = None
        for si in range(cfg.steps):
            t0 = time.perf_counter_ns()
            naive = compute_mask_naive(state, vocab)
            t1 = time.perf_counter_ns()
            compressed_ns = None
            masks_equal = None
            if tbl is not None:
                t2 = time.perf_counter_ns()
                comp = compute_mask_compressed(state, tbl, vocab)
                t3 = time.perf_counter_ns()
                compressed_ns = t3 - t2
                expanded = expand_class_mask(comp.bits, tbl)
                masks_equal = bool(np.array_equal(expanded, naive.bits))
                if not masks_equal and first_mismatch is None:
                    diff = int(np.flatnonzero(expanded != naive.bits)[0])
                    first_mismatch = {
                        "run": ri,
                        "step": si,
                        "state": state.digest(),
                        "token": diff,
                        "naive_bit": bool(naive.bits[diff]),
                        "compressed_bit": bool(expanded[diff]),
                    }
            allowed = np.flatnonzero(naive.bits)
            sampled = None
            if len(allowed):
                sampled = int(allowed[rng.randrange(len(allowed))])
            steps.append(
                StepRecord(
                    index=si,
                    state_digest=state.digest(),
                    sampled_token=sampled,
                    allowed_count=len(allowed),
                    masks_equal=masks_equal,
                    naive_ns=t1 - t0,
                    compressed_ns=compressed_ns,
                )
            )
            if sampled is None:
                outcome = "stuck"
                break
            if sampled == vocab.eos_id:
                outcome = "completed"
                break
            state = commit_token(state, sampled, tbl, vocab)
            out += vocab.tokens[sampled]
        report.runs.append(
            RunReport(
                seed=cfg.seed,
                run_index=ri,
                outcome=outcome,
                output=bytes(out),
                steps=steps,
                first_mismatch=first_mismatch,
            )
        )
    return report
