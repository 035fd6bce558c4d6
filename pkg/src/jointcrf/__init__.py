"""Joint sequence labeling over paired VN/PB role sets with a constrained CRF."""

from .crf import (Lattice, MASK_SCORE, forward_backward, log_marginal, log_partition,
                  make_lattice, posterior_marginals, score_sequence, viterbi)
from .errors import (AlignmentError, CorpusParseError, DataError, InfeasibleMaskError,
                     InventoryError, JointCrfError, UnknownRoleError)
from .evaluation import completion_f1, extract_spans, span_f1, violation_rate
from .features import FeatureExtractor, featurize, new_extractor, score_emissions
from .instances import PredicateInstance
from .labels import (JointLabel, LabelSpace, RoleKind, RoleLabel, Scheme, TagSpace,
                     build_label_space, derive_cooccurrence_filter, project)
from .losses import (constrained_marginal_nll, joint_nll, marginal_nll, multitask_nll)
from .model import (Model, complete_instance, decode_joint, load_model, save_model,
                    tag_instance)
from .semlink import (ConstraintMask, MaskProvenance, SemlinkMapping, compile_completion_mask,
                      compile_semlink_mask, count_violations, intersect, load_semlink)
from .training import REGIMES, TrainConfig, route_instance, train

__version__ = "0.1.0"
