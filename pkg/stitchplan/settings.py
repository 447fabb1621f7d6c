from pathlib import Path
import os

from dotenv import load_dotenv

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

load_dotenv()

# Only used by Django internals; nothing here is signed or served.
SECRET_KEY = os.environ.get('SECRET_KEY', 'stitchplan-local-only')

DEBUG = os.getenv("DEBUG", "False") == "True"

ALLOWED_HOSTS = []

# Application definition

INSTALLED_APPS = [
    'rest_framework',
    'production.apps.ProductionConfig',
    'evolution.apps.EvolutionConfig',
    'experiments.apps.ExperimentsConfig',
]

# Batch tool: no database persistence, Django falls back to its dummy backend.
DATABASES = {}

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


def _env(key, default, cast=str):
    value = os.getenv(f"STITCHPLAN_{key}")
    if value is None or value == "":
        return default
    return cast(value)


STITCHPLAN = {
    'DATASET': _env('DATASET', str(BASE_DIR / 'data' / 'fastreact20.json')),
    'NP': _env('NP', 400, int),
    'XI': _env('XI', 10, int),
    'GMAX': _env('GMAX', None, int),  # None -> D * XI
    'H': _env('H', 5, int),
    'BETA': _env('BETA', 0.2, float),
    'RUNS': _env('RUNS', 30, int),
    'SEED': _env('SEED', 42, int),
    'JOBS': _env('JOBS', 1, int),
    'SDAY': _env('SDAY', -7, int),
    'NOISE_SCOPE': _env('NOISE_SCOPE', 'order_day'),
    # STITCHPLAN_OUT overrides --out on every command.
    'OUT_DIR': os.environ.get('STITCHPLAN_OUT'),
    'DEFAULT_OUT_DIR': str(BASE_DIR / 'results'),
    'JADE': {
        'C': 0.1,
        'P': 0.05,
        'MU_CR': 0.5,
        'MU_F': 0.5,
    },
    'NSGA2': {
        'ETA_C': 20.0,
        'ETA_M': 20.0,
        'P_C': 0.9,
        'P_M': None,  # None -> 1 / D
    },
}

LOG_LEVEL = os.getenv('STITCHPLAN_LOG_LEVEL', 'INFO')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{asctime} {levelname} {name} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'loggers': {
        'production': {'handlers': ['console'], 'level': LOG_LEVEL, 'propagate': False},
        'evolution': {'handlers': ['console'], 'level': LOG_LEVEL, 'propagate': False},
        'experiments': {'handlers': ['console'], 'level': LOG_LEVEL, 'propagate': False},
    },
}
