"""
Configuration file for the LGR sparse-AD toolkit

Every setting below is a plain module constant. The ones a user may want to
change per machine are read from the environment (or a local .env file):
- Finite-difference step and verification tolerance
- Default random seed for reproducible evaluation points
- Output directory for exported NLP data
- Verbose component logging

Command-line flags override these values for a single run.
"""
import os
from dotenv import load_dotenv

# Load environment variables
load_dotenv()

# Verification Configuration
FD_STEP = float(os.getenv("SPARSEAD_FD_STEP", "1e-5"))  # Central-difference step, scaled per coordinate
CHECK_TOLERANCE = float(os.getenv("SPARSEAD_TOLERANCE", "1e-6"))  # Pass/fail threshold on relative error
ORACLE_TOLERANCE = 1e-12  # Sparse vs dense-jet agreement
ROW_TOLERANCE = 1e-14  # Vector graph rows vs the scalar graph of the same mesh point

# Evaluation Points
DEFAULT_SEED = int(os.getenv("SPARSEAD_SEED", "0"))
RANDOM_POINT_LOW = 0.5  # Random points are uniform on [LOW, HIGH)
RANDOM_POINT_HIGH = 1.5

# LGR Basis Configuration
MAX_SEGMENT_DEGREE = 64  # Largest degree of one segment
ROOT_RESIDUAL_TOL = 1e-14  # Residual of P_{d-1} + P_d at each polished root, scaled by d^2
NEWTON_MAX_ITERATIONS = 100

# Benchmark Configuration
BENCH_REPEAT = int(os.getenv("SPARSEAD_BENCH_REPEAT", "5"))  # Evaluations timed per mesh size

# Output Configuration
OUTPUT_DIRECTORY = os.getenv("SPARSEAD_OUTPUT_DIR", "nlp_export")
SIGNIFICANT_DIGITS = 17  # Enough to round-trip any double

# Logging
VERBOSE = os.getenv("SPARSEAD_VERBOSE", "0") == "1"  # Component progress on stderr
