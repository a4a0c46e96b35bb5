"""A reduced size and power study.  The full-scale runs live in the
acceptance suite; this one finishes in about a minute."""
from spherebispec.simulation import StudyManifest, run_power_study

manifest = StudyManifest.parse("""
statistics = J3, J1
L = 64
K = 0, 2
fnl = 0, 1000, 3000
reps = 60
""", seed=11)

report = run_power_study(manifest, workers=1)
print("rejection rates (%), T = Monte Carlo thresholds, A = asymptotic thresholds")
print(report.rates_csv())
print("Monte Carlo critical values under the null")
print(report.critical_csv())
