"""
Configuration settings for BSBM community recovery
"""
import os
from dotenv import load_dotenv

# Load environment variables
load_dotenv()


def _env_flag(name: str, default: str = "False") -> bool:
    return os.getenv(name, default).lower() in ("1", "true", "yes")


class Config:
    """Application configuration"""

    # Application settings
    APP_NAME = "BSBM Recovery"
    VERSION = "1.0.0"
    DEBUG = _env_flag("DEBUG")
    LOG_LEVEL = os.getenv("BSBM_LOG_LEVEL", "INFO").upper()

    # Output
    RESULTS_DIR = os.getenv("BSBM_RESULTS_DIR", "results")

    # Execution
    THREADS = int(os.getenv("BSBM_THREADS", "1"))
    MASTER_SEED = int(os.getenv("BSBM_MASTER_SEED", "20200117"))
    RECORD_WALL_TIME = _env_flag("BSBM_RECORD_WALL_TIME")

    # Eigensolver
    EIGEN_TOL = float(os.getenv("BSBM_EIGEN_TOL", "1e-8"))
    EIGEN_MAX_ITER = int(os.getenv("BSBM_EIGEN_MAX_ITER", "5000"))
    EIGEN_SOLVER = os.getenv("BSBM_EIGEN_SOLVER", "power").lower()
    EIGEN_SOLVERS = ("power", "lanczos")

    # Concentration bench
    DENSE_NORM_CAP = int(os.getenv("BSBM_DENSE_NORM_CAP", "2000"))
    HOEFFDING_FAILURE = float(os.getenv("BSBM_HOEFFDING_FAILURE", "0.01"))
    MOMENT_REGIME_CONSTANT = float(os.getenv("BSBM_MOMENT_REGIME_CONSTANT", "1.0"))

    @classmethod
    def validate(cls):
        """Validate configuration settings"""
        assert cls.THREADS >= 1, "BSBM_THREADS must be at least 1"
        assert 0 < cls.EIGEN_TOL < 1, "BSBM_EIGEN_TOL must be in (0, 1)"
        assert cls.EIGEN_MAX_ITER >= 1, "BSBM_EIGEN_MAX_ITER must be positive"
        assert cls.EIGEN_SOLVER in cls.EIGEN_SOLVERS, \
            f"BSBM_EIGEN_SOLVER must be one of {cls.EIGEN_SOLVERS}"
        assert cls.DENSE_NORM_CAP >= 2, "BSBM_DENSE_NORM_CAP must be at least 2"
        assert 0 < cls.HOEFFDING_FAILURE < 1, "BSBM_HOEFFDING_FAILURE must be in (0, 1)"
        assert cls.MOMENT_REGIME_CONSTANT > 0, "BSBM_MOMENT_REGIME_CONSTANT must be positive"

        return True


# Validate configuration on import
Config.validate()
