"""qmlcha: separability-entanglement classification for bipartite states.

Combines an inner convex-hull approximation of the separable set (decided
by linear programming) with bagged decision trees trained on hull-extended
features, plus k-symmetric-extendibility witnesses and seeded random-state
samplers.
"""

from .qstate import (
    DensityMatrix,
    Dims,
    FeatureVector,
    GellMannBasis,
    defeaturize,
    depolarize,
    featurize,
    gellmann_basis,
    is_ppt,
    maximally_mixed,
    partial_transpose,
    singlet_state,
    state_from_ket,
    tensor,
    tiles_state,
)
from .sampling import (
    LABEL_ENTANGLED,
    LABEL_SEPARABLE,
    LabeledDataset,
    LabelSource,
    SamplerConfig,
    build_dataset,
    dirichlet_spectrum,
    haar_unitary,
    make_rng,
    random_density,
    random_pure_product,
    sample_ppt_states,
)
from .cha import (
    ALPHA_CAP,
    AlphaResult,
    AlphaStatus,
    ConvexHull,
    CriticalPointConfig,
    CriticalPointResult,
    alpha,
    alpha_batch,
    build_hull,
    classify_cha,
    critical_point,
    extend_dataset,
)
from .ensemble import (
    BaggedCommittee,
    BchaModel,
    ChaClassifier,
    DecisionTree,
    TreeParams,
    evaluate,
    predict_bcha,
    predict_committee,
    predict_tree,
    train_bagging,
    train_bcha,
    train_tree,
)
from .kext import (
    ThetaKPoint,
    TwoLocalHamiltonian,
    boundary_projection,
    ground_marginal,
    random_two_local,
    witness_check,
)

__version__ = "0.1.0"
