from .attacks import AttackOutcome
from .attacks import FabConfig
from .attacks import PgdConfig
from .attacks import fab_attack
from .attacks import hyperplane_project_m
from .attacks import pgd_attack
from .campaign import clean_accuracy
from .campaign import robust_accuracy
from .campaign import run_campaign
from .campaign import single_attribute_ablation
from .certify import CertResult
from .certify import SmoothingConfig
from .certify import certify
from .oracle import ClassifierOracle
from .oracle import LinearOracle
from .oracle import PrototypeOracle
from .oracle import SyntheticPopulation
from .oracle import gen_population
from .ranking import RankingResult
from .semgeo import BudgetMatrix
from .semgeo import BudgetSpec
from .semgeo import SemanticBasis
