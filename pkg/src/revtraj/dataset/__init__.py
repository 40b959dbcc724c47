from revtraj.dataset.iteration import (
    MissingPriorIteration,
    RefusesOverwrite,
    iteration_dir,
    manifest,
    run_iteration,
)
from revtraj.dataset.mixing import EmptyPool, IterationPlan, IterationSpec, MixConfig, mix
from revtraj.dataset.samples import (
    DatasetSample,
    Message,
    ParseError,
    RenderError,
    load_general,
    read_jsonl,
    render_sample,
    write_jsonl,
)

__all__ = [
    "MissingPriorIteration", "RefusesOverwrite", "iteration_dir", "manifest", "run_iteration",
    "EmptyPool", "IterationPlan", "IterationSpec", "MixConfig", "mix", "DatasetSample", "Message",
    "ParseError", "RenderError", "load_general", "read_jsonl", "render_sample", "write_jsonl",
]
