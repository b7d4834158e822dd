"""Per-replicate seeding and chunked, order-independent replicate evaluation."""
import hashlib
import logging
from multiprocessing import get_context
from typing import Callable, List, Tuple

import numpy as np
from numpy.random import Generator, Philox, SeedSequence

from ..core.errors import DomainError

logger = logging.getLogger(__name__)

CHUNK_SIZE = 250

ReplicateTask = Callable[[Generator], np.ndarray]


class ReplicateSeeder:
    """Replicate i draws from SeedSequence([lo32(seed), hi32(seed), key(experiment_id), i])."""

    def __init__(self, master_seed: int, experiment_id: str):
        if not 0 <= master_seed < 2**64:
            raise DomainError("seed must be an unsigned 64-bit integer")
        self.master_seed = int(master_seed)
        self.experiment_id = experiment_id
        self.key = int.from_bytes(hashlib.sha256(experiment_id.encode("utf-8")).digest()[:4], "big")

    def sequence(self, index: int) -> SeedSequence:
        lo = self.master_seed & 0xFFFFFFFF
        hi = self.master_seed >> 32
        return SeedSequence([lo, hi, self.key, int(index)])

    def generator(self, index: int) -> Generator:
        return Generator(Philox(self.sequence(index)))

    def child(self, suffix: str) -> "ReplicateSeeder":
        return ReplicateSeeder(self.master_seed, f"{self.experiment_id}/{suffix}")


def _run_chunk(args: Tuple[ReplicateTask, int, str, int, int]) -> np.ndarray:
    task, master_seed, experiment_id, start, stop = args
    seeder = ReplicateSeeder(master_seed, experiment_id)
    return np.stack([np.atleast_1d(np.asarray(task(seeder.generator(i)), dtype=float)) for i in range(start, stop)])


def run_replicates(task: ReplicateTask, seeder: ReplicateSeeder, replicates: int, workers: int = 1) -> np.ndarray:
    """Evaluate task once per replicate; row i always comes from replicate i's generator.

    Returns an array of shape (replicates, width) where width is the length of one task result.
    """
    if replicates < 1:
        raise DomainError(f"replicates must be >= 1, got {replicates}")
    if workers < 1:
        raise DomainError(f"workers must be >= 1, got {workers}")
    bounds = [(lo, min(lo + CHUNK_SIZE, replicates)) for lo in range(0, replicates, CHUNK_SIZE)]
    args = [(task, seeder.master_seed, seeder.experiment_id, lo, hi) for lo, hi in bounds]

    chunks: List[np.ndarray] = []
    if workers > 1 and len(args) > 1:
        ctx = get_context("spawn")
        with ctx.Pool(processes=min(workers, len(args))) as pool:
            for result in pool.imap(_run_chunk, args, chunksize=1):
                chunks.append(result)
    else:
        for a in args:
            chunks.append(_run_chunk(a))
    logger.debug(f"Ran {replicates} replicates of '{seeder.experiment_id}' in {len(chunks)} chunks")
    return np.concatenate(chunks, axis=0)
