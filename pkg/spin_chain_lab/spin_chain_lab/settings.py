from pathlib import Path
from dotenv import load_dotenv
import os
load_dotenv()

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


# Only management commands run in this project; there is no web surface.
SECRET_KEY = os.getenv('DJANGO_SECRET_KEY', 'spin-chain-lab-local-only')

DEBUG = os.getenv('DJANGO_DEBUG', 'false').lower() in ['true', '1', 'yes']

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'hamiltonian_learning',
]

# No models, so no database.
DATABASES = {}


# ========== Numerical defaults ==========
# Every chainlab flag falls back to these; the library itself never reads settings.

CHAINLAB = {
    'OUTPUT_DIR': Path(os.getenv('CHAINLAB_OUTPUT_DIR', BASE_DIR / 'runs')),
    'TOLERANCE': float(os.getenv('CHAINLAB_TOLERANCE', '1e-10')),
    'SEED': int(os.getenv('CHAINLAB_SEED', '1234')),
    'RITZ_COUNT': int(os.getenv('CHAINLAB_RITZ_COUNT', '6')),
    'KRYLOV_DIM': int(os.getenv('CHAINLAB_KRYLOV_DIM', '100')),
    'MAX_RESTARTS': int(os.getenv('CHAINLAB_MAX_RESTARTS', '30')),
}


# ========== Logging ==========

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{asctime} {levelname} {name}: {message}',
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
        'hamiltonian_learning': {
            'handlers': ['console'],
            'level': os.getenv('CHAINLAB_LOG_LEVEL', 'INFO'),
            'propagate': False,
        },
    },
}


# Internationalization
# https://docs.djangoproject.com/en/5.2/topics/i18n/

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True
