"""How well does the classifier do on features that carry no information?

Cross-validated accuracy on random features is centred on 50%, but its upper
tail is what a real result has to beat. Smaller cohorts have a wider tail.
"""
from phonotrauma.experiments import run_null_baseline

for pairs in (134, 64, 20):
    null = run_null_baseline(pairs, 1000, seed=1)
    print(f"{pairs:4d} pairs: mean {100 * null.mean:5.2f}%  95th percentile {100 * null.upper_bound:5.2f}%")
