import os
from dotenv import load_dotenv

load_dotenv()

class Config:
    # Logging
    LOG_LEVEL = os.getenv('HKG_LOG_LEVEL', 'INFO').upper()

    # Output settings
    OUTPUT_DIR = os.getenv('HKG_OUTPUT_DIR', 'output')

    # Reproducibility
    RANDOM_SEED = int(os.getenv('HKG_RANDOM_SEED', '0'))

    # Spectral bound (power iteration on -L_h)
    POWER_MAX_ITER = int(os.getenv('HKG_POWER_MAX_ITER', '200'))
    POWER_TOL = float(os.getenv('HKG_POWER_TOL', '1e-6'))

    # Scalar ODE oracle
    ORACLE_RTOL = float(os.getenv('HKG_ORACLE_RTOL', '1e-10'))
    ORACLE_BLOWUP_THRESHOLD = float(os.getenv('HKG_ORACLE_BLOWUP_THRESHOLD', '1e8'))

    @classmethod
    def validate(cls):
        bad_vars = []

        if cls.LOG_LEVEL not in ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL'):
            bad_vars.append('HKG_LOG_LEVEL')
        if cls.POWER_MAX_ITER < 1:
            bad_vars.append('HKG_POWER_MAX_ITER')
        if not 0 < cls.POWER_TOL < 1:
            bad_vars.append('HKG_POWER_TOL')
        if not 0 < cls.ORACLE_RTOL < 1e-3:
            bad_vars.append('HKG_ORACLE_RTOL')
        if cls.ORACLE_BLOWUP_THRESHOLD <= 1e6:
            bad_vars.append('HKG_ORACLE_BLOWUP_THRESHOLD')

        if bad_vars:
            raise ValueError(f"Invalid environment variables: {', '.join(bad_vars)}")
