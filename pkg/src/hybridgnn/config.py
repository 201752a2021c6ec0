"""Run configuration: one JSON file driving the whole pipeline.

Schemes are given per relationship label, either as a plain list of node
type labels (every step uses that relationship) or as an object with
explicit ``types`` and ``relationships`` label lists.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

from .graph import MetapathScheme, MultiplexGraph
from .model import ModelDims
from .sampling.walks import SamplerConfig
from .trainer import TrainConfig


@dataclass
class RunConfig:
    edge_file: str
    type_file: str
    output_dir: str
    schemes: dict[str, list]              # rel label -> scheme descriptions
    dims: ModelDims = field(default_factory=ModelDims)
    train: TrainConfig = field(default_factory=TrainConfig)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    eval_fractions: tuple[float, float, float] = (0.85, 0.05, 0.10)
    eval_seed: int = 0
    topk: int = 10

    def override_seed(self, seed: int) -> None:
        self.train.seed = seed
        self.sampler.seed = seed
        self.eval_seed = seed

    def resolve_schemes(self, g: MultiplexGraph) -> dict[int, list[MetapathScheme]]:
        """Resolve label descriptions into validated schemes per rel id."""
        out: dict[int, list[MetapathScheme]] = {}
        for rel_label, descriptions in self.schemes.items():
            if rel_label not in g.rel_to_id:
                from .errors import UnknownRelationship

                raise UnknownRelationship(f"unknown relationship {rel_label!r}")
            r = g.rel_to_id[rel_label]
            resolved = []
            for desc in descriptions:
                if isinstance(desc, dict):
                    scheme = g.resolve_scheme(desc["types"], desc["relationships"])
                else:
                    scheme = g.resolve_scheme(desc, [rel_label] * (len(desc) - 1))
                g.validate_scheme(scheme)
                resolved.append(scheme)
            out[r] = resolved
        for r in range(g.n_rels):
            out.setdefault(r, [])
        return out

    def to_dict(self) -> dict:
        return {
            "edge_file": self.edge_file,
            "type_file": self.type_file,
            "output_dir": self.output_dir,
            "schemes": self.schemes,
            "dims": {"d": self.dims.d, "d_h": self.dims.d_h, "d_k": self.dims.d_k},
            "train": asdict(self.train),
            "sampler": {**asdict(self.sampler),
                        "fanout": list(self.sampler.fanout)},
            "eval_fractions": list(self.eval_fractions),
            "eval_seed": self.eval_seed,
            "topk": self.topk,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        sampler = dict(data.get("sampler", {}))
        if "fanout" in sampler:
            sampler["fanout"] = tuple(sampler["fanout"])
        return cls(
            edge_file=data["edge_file"],
            type_file=data["type_file"],
            output_dir=data["output_dir"],
            schemes={k: list(v) for k, v in data["schemes"].items()},
            dims=ModelDims(**data.get("dims", {})),
            train=TrainConfig(**data.get("train", {})),
            sampler=SamplerConfig(**sampler),
            eval_fractions=tuple(data.get("eval_fractions", (0.85, 0.05, 0.10))),
            eval_seed=data.get("eval_seed", 0),
            topk=data.get("topk", 10),
        )


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return RunConfig.from_dict(json.load(fh))


def save_config(cfg: RunConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(cfg.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
