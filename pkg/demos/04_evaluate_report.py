"""
Scoring a detector
==================

Metrics work on (record, predicted class, probabilities) triples. The spoof
score of a prediction is one minus the probability of the Human class.
"""

import numpy as np

from hsad import UtteranceRecord, accuracy, eer, evaluate
from hsad.metrics import render_accuracy_table

rng = np.random.default_rng(3)
groups = ["G1", "G2", "G3", "G4", "G5", "G6"]
predictions = []
for i in range(240):
    rec = UtteranceRecord(utterance_id=f"u{i:03d}", speaker_id=f"s{i % 6}", group=groups[i % 6])
    # a fairly good but imperfect detector: the true class gets most of the mass
    logits = rng.normal(0.0, 1.0, 4)
    logits[rec.class_label] += 2.5
    probs = np.exp(logits) / np.exp(logits).sum()
    predictions.append((rec, int(np.argmax(probs)), probs))

report = evaluate(predictions)
print(report.render())

# Accuracy is rounded half-up to two decimals.
print(render_accuracy_table([("example", 63663, 71237)]))
print("accuracy(1, 32) =", accuracy(1, 32))

# The EER sits where false rejections of genuine audio equal false acceptances of spoofs.
print("EER of two overlapping score sets: %.3f" % eer([0.1, 0.2, 0.6], [0.4, 0.7, 0.9]))
