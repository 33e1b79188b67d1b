import os

from dotenv import load_dotenv

load_dotenv()


class Config:
    """Configuration class for cmpslab"""

    # Logging
    LOG_LEVEL = os.environ.get('CMPSLAB_LOG', 'INFO').upper()

    # Output settings
    OUTPUT_FOLDER = os.environ.get('CMPSLAB_OUT') or os.path.join(os.getcwd(), 'runs')
    JOBS = int(os.environ.get('CMPSLAB_JOBS', '1'))

    # Linear algebra tolerances
    NULL_TOL = 1e-8                 # relative to the matrix 1-norm
    STEADY_STATE_NEG_TOL = -1e-6    # lowest allowed eigenvalue of the steady state
    OBSERVABLE_NEG_TOL = -1e-9      # lowest allowed local observable before clipping

    # Optimizer defaults
    OPTIMIZER = {
        'max_iters': 2000,
        'grad_step': 1e-5,
        'energy_tol': 1e-12,
        'grad_tol': 1e-7,
        'constraint_tol': 1e-7,
        'penalty_init': 10.0,
        'penalty_growth': 4.0,
        'max_outer': 25,
        'restarts': 8,
        'seed': 0,
        'init_scale': 0.5,
        'line_search_shrink': 0.5,
        'armijo': 1e-4,
    }
    COUPLED_RESTARTS = 4
    DEFAULT_PAIRS = 2
    WARM_START_Z_SCALE = 1e-2

    # Energy surfaces
    SURFACE_MIN_NODES = 9
    SURFACE_MIN_SPAN = 0.15
    SURFACE_NODES = 11
    SPLINE_BC = 'not-a-knot'
    RHO_REF_POLICY = 'total'

    # Bethe oracle
    BETHE_NODES = 256
    BETHE_TOL = 1e-8

    # Run modes
    RUN_MODES = {
        'single': 'Optimize single-field ground states',
        'coupled': 'Optimize coupled two-species ground states',
        'sweep-density': 'Energy-density sweep around the target density',
        'luttinger': 'Sweep and extract Luttinger parameters',
        'bethe': 'Exact Lieb-Liniger energies from the Bethe ansatz',
    }


class DevelopmentConfig(Config):
    """Quick desk-check configuration"""
    OPTIMIZER = dict(Config.OPTIMIZER, max_iters=500, restarts=2, max_outer=15)
    COUPLED_RESTARTS = 1
    BETHE_NODES = 128


class ProductionConfig(Config):
    """Full-accuracy configuration"""
    OPTIMIZER = dict(Config.OPTIMIZER, max_iters=5000, restarts=8)


# Configuration mapping
config = {
    'development': DevelopmentConfig,
    'production': ProductionConfig,
    'default': Config,
}


def active_config():
    """Profile selected by CMPSLAB_PROFILE"""
    return config.get(os.environ.get('CMPSLAB_PROFILE', 'default'), Config)
