"""End-to-end orchestration: mining -> masks -> localizer -> proposals -> mAP.

Also hosts the two reference comparisons used in ablations: a single
normal branch, and two branches trained without mining (all-ones masks).
"""

from dataclasses import dataclass, field, replace

import numpy as np

from . import localizer as loc
from .backbone import forward, init_params
from .losses import LossWeights
from .metrics import BANDS, map_bands, slow_subset_filter, to_detections
from .mining import MiningConfig, SlowMask, generate_mask, subsample
from .proposals import PostprocessConfig, postprocess
from .synthgen import SynthConfig, generate
from .trainer import TrainConfig, train

MINER_LR = 5e-4
LOCALIZER_LR_FACTOR = 10.0  # the localizer trains at ten times the miner's rate


@dataclass(frozen=True)
class PipelineConfig:
    hidden: int = 64
    context_radius: int = 1
    miner_train: TrainConfig = TrainConfig(learning_rate=MINER_LR, iterations=500)
    loc_train: TrainConfig = TrainConfig(learning_rate=MINER_LR * LOCALIZER_LR_FACTOR, iterations=500)
    loss_weights: LossWeights = LossWeights()
    mining: MiningConfig = MiningConfig()
    postprocess: PostprocessConfig = PostprocessConfig()


def default_config(seed=0):
    base = PipelineConfig()
    return replace(
        base,
        miner_train=replace(base.miner_train, seed=seed),
        loc_train=replace(base.loc_train, seed=seed),
    )


def train_miner(corpus, cfg, seed=0):
    """Stage one: a backbone trained on sub-sampled features, then frozen."""
    d, C = corpus[0].features.d, corpus[0].label.num_classes
    params = init_params(d, cfg.hidden, C, cfg.context_radius, seed)
    tau = cfg.mining.tau
    return train(params, corpus, cfg.loss_weights, cfg.miner_train,
                 transform=lambda x: subsample(x, tau))


def mine_masks(miner, corpus, mining_cfg):
    return {v.video_id: generate_mask(miner, v.features, mining_cfg) for v in corpus}


def ones_masks(corpus):
    return {v.video_id: SlowMask(np.ones(v.features.T, dtype=np.int8)) for v in corpus}


def train_two_branch(corpus, masks, cfg, seed=0):
    d, C = corpus[0].features.d, corpus[0].label.num_classes
    state = loc.init_state(d, cfg.hidden, C, cfg.context_radius, seed, cfg.loss_weights)
    return loc.train_localizer(state, corpus, masks, cfg.loc_train)


def train_single_branch(corpus, cfg, seed=0):
    d, C = corpus[0].features.d, corpus[0].label.num_classes
    params = init_params(d, cfg.hidden, C, cfg.context_radius, seed)
    return train(params, corpus, cfg.loss_weights, cfg.loc_train)


def detect(predict, corpus, pp_cfg):
    """``predict`` maps a FeatureSequence to (cas, attn)."""
    dets = []
    for v in corpus:
        cas, attn = predict(v.features)
        dets += to_detections(postprocess(cas, attn, pp_cfg, v.video_id), v.features.snippet_seconds)
    return dets


def evaluate(dets, corpus, slow_only=False, bands=None):
    gts = [g for v in corpus for g in v.gts]
    if slow_only:
        gts = slow_subset_filter(gts)
    return map_bands(dets, gts, bands)


@dataclass
class ExperimentResult:
    seed: int
    reports: dict = field(default_factory=dict)  # variant -> {"all": report, "slow": report}
    curves: dict = field(default_factory=dict)

    def avg_map(self, variant, subset="all", band="avg[0.1:0.7]"):
        return self.reports[variant][subset]["bands"][band]


def run_experiment(seed, synth_cfg=None, cfg=None, bands=None):
    """Train and evaluate SMEN and both references on one seeded corpus."""
    synth_cfg = synth_cfg or replace(SynthConfig(), seed=seed)
    cfg = cfg or default_config(seed)
    bands = bands or {"avg[0.1:0.7]": BANDS["avg[0.1:0.7]"]}
    train_set = generate(synth_cfg, "train")
    test_set = generate(synth_cfg, "test")

    result = ExperimentResult(seed)
    miner, result.curves["miner"] = train_miner(train_set, cfg, seed)
    masks = mine_masks(miner, train_set, cfg.mining)

    smen, result.curves["smen"] = train_two_branch(train_set, masks, cfg, seed)
    ensemble, result.curves["two_branch"] = train_two_branch(train_set, ones_masks(train_set), cfg, seed)
    single, result.curves["baseline"] = train_single_branch(train_set, cfg, seed)

    predictors = {
        "smen": lambda x: loc.infer(smen, x),
        "two_branch": lambda x: loc.infer(ensemble, x),
        "baseline": lambda x: (lambda o: (o.cas, o.attn))(forward(single, x)),
    }
    for name, predict in predictors.items():
        dets = detect(predict, test_set, cfg.postprocess)
        result.reports[name] = {
            "all": evaluate(dets, test_set, bands=bands),
            "slow": evaluate(dets, test_set, slow_only=True, bands=bands),
        }
    return result
