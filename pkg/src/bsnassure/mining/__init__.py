from .knowledge import ContextualKnowledge, Dissonance, NodeKnowledge, mine_cgm, queue_recommendation
from .linear import LinearModel, RankDeficiencyError, fit_linear
from .rules import Condition, Rule, RuleSet, learn_rules
from .tree import DecisionTree, LearnerError, entropy, learn_tree

__all__ = [
    "Condition", "ContextualKnowledge", "DecisionTree", "Dissonance", "LearnerError",
    "LinearModel", "NodeKnowledge", "RankDeficiencyError", "Rule", "RuleSet",
    "entropy", "fit_linear", "learn_rules", "learn_tree", "mine_cgm", "queue_recommendation",
]
