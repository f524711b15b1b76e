"""
Telling adaptation from anomaly with context
============================================

A Gini decision tree looks at the time, the weather and how far the home
and its neighbours drifted from their usual load, then labels the deviation.
"""

from datetime import datetime

from iot_energy.context_tree import (
    FEATURES,
    accuracy,
    build_context_features,
    classify,
    flip_labels,
    make_rule_dataset,
    train_tree,
)

# Samples labelled by a known rule, with a few training labels corrupted.
data = make_rule_dataset(200, seed=0)
tree = train_tree(flip_labels(data[:150], 0.05, seed=0), max_depth=4)
print(f"root splits on {FEATURES[tree.feature]} at {tree.threshold:.3f}")
print(f"held-out accuracy {accuracy(tree, data[150:]):.3f}, depth {tree.depth()}")

# A cold snowy evening where neighbours also use more: the home follows them.
evening = build_context_features(datetime(2007, 2, 6, 19, 0), -4.0, "snow",
                                 own_deviation=0.12, peer_deviations=[0.10, 0.15, 0.09])
# A mild weekday noon with a large unexplained jump.
noon = build_context_features(datetime(2007, 5, 9, 12, 0), 18.0, "clear",
                              own_deviation=0.80, peer_deviations=[0.01, 0.02])
for name, sample in (("snowy evening", evening), ("mild noon", noon)):
    label, prob = classify(tree, sample)
    print(f"{name}: {label} (p={prob:.2f})")
