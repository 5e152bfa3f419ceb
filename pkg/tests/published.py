"""Reference numbers from the published crash-propensity study.

Only the columns needed by the tests are transcribed.  Rows that are
internally inconsistent in the source are left out (see the project notes).
"""

# goodness of fit: label -> (L0, Lc, k, n, AIC, finite-sample AIC, R2, chi2).
# Model 2's printed AIC pair (639.21, 640.92) disagrees with its own Lc and k
# (639.25, 641.19), so those two entries are left as None.
FIT = {
    "model 1": (-670.24, -305.7, 24, 1053, 659.41, 660.56, 0.544, 729.08),
    "model 2": (-670.24, -288.623, 31, 1053, None, None, 0.569, 763.234),
    "model 4": (-670.24, -277.6, 39, 1053, 633.21, 636.27, 0.586, 785.28),
}

# heterogeneity-in-means model: variable -> (beta, percent relative risk).
# "Three traffic convictions" is omitted: beta -16.99 gives -100.00, not -101.00.
RELATIVE_RISK = {
    "total miles driven": (-0.008, -0.80),
    "one traffic conviction": (-0.309, -26.58),
    "two traffic convictions": (0.85, 133.96),
    "lower clothing motorcycle oriented": (-6.5, -99.85),
    "upper body clothing red": (1.38, 297.49),
    "license held 30+ years": (-0.36, -30.23),
    "5 hours or less sleep": (1.09, 197.43),
    "female rider": (0.39, 47.70),
    "rider is not the owner": (-1.16, -68.65),
    "hispanic or latino rider": (0.77, 115.98),
    "rider age": (-0.04, -3.92),
    "rider weight": (-0.007, -0.70),
    "college graduate": (-0.28, -24.42),
    "origin home": (-3.08, -95.40),
    "origin work": (-2.09, -87.63),
    "destination friend/relative": (1.55, 371.15),
    "road used daily": (0.5, 64.87),
    "road used once per month": (-1.06, -65.35),
    "helmet coverage type 1": (-0.68, -49.34),
    "training 2001-2010": (-1.15, -68.34),
    "training 2011-2015": (-1.43, -76.07),
    "speed over 50 mph": (-2.98, -94.92),
}

# (model, variable) -> (mu, sd, percent above zero)
SHARES = {
    ("model 2", "total miles driven"): (-0.026, 0.064, 34.23),
    ("model 2", "one traffic conviction"): (0.202, 1.596, 55.04),
    ("model 2", "three traffic convictions"): (-4.541, 19.125, 40.62),
    ("model 2", "lower clothing motorcycle oriented"): (-4.519, 4.988, 18.25),
    ("model 2", "female rider"): (-0.066, 2.286, 48.85),
    ("model 2", "rider is not the owner"): (-0.872, 2.439, 36.035),
    ("model 2", "speed over 50 mph"): (-2.687, 3.417, 21.58),
    ("model 4", "total miles driven"): (-0.008, 0.051, 43.77),
    ("model 4", "one traffic conviction"): (-0.309, 1.65, 42.57),
    ("model 4", "three traffic convictions"): (-16.99, 33.8, 30.76),
    ("model 4", "lower clothing motorcycle oriented"): (-6.5, 7.24, 18.46),
    ("model 4", "female rider"): (0.39, 1.71, 59.07),
    ("model 4", "rider is not the owner"): (-1.16, 2.89, 34.41),
    ("model 4", "speed over 50 mph"): (-2.98, 3.49, 19.66),
}

# variable -> (mean, sd case, mean, sd control, verdict); n = 351 cases, 702 controls
DESCRIPTIVE = {
    "hours of sleep": (7.67, 1.24, 8.12, 1.75, "Fail"),
    "one-way trip mileage": (19.80, 23.84, 23.92, 42.90, "Pass"),
    "depressant": (0.03, 0.16, 0.03, 0.17, "Pass"),
    "helmet coverage type 4": (0.47, 0.50, 0.50, 0.50, "Pass"),
    "clothing color red": (0.04, 0.20, 0.03, 0.18, "Pass"),
}
N_CASES, N_CONTROLS = 351, 702
