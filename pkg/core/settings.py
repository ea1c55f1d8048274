import os
from pathlib import Path
from decouple import config

BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = config('SECRET_KEY', default='cloth-folding-lab-local-key')

DEBUG = config('DEBUG', default=True, cast=bool)

ALLOWED_HOSTS = []

INSTALLED_APPS = [
    'django.contrib.contenttypes',

    # Third party apps
    'rest_framework',

    # Local apps
    'cloth',
    'folding',
    'learning',
    'harness',
]

DATABASES = {
    'default': {
        'ENGINE': config('DB_ENGINE', default='django.db.backends.sqlite3'),
        'NAME': config('DB_NAME', default=str(BASE_DIR / 'runs.sqlite3')),
        'USER': config('DB_USER', default=''),
        'PASSWORD': config('DB_PASSWORD', default=''),
        'HOST': config('DB_HOST', default=''),
        'PORT': config('DB_PORT', default=''),
    }
}

LANGUAGE_CODE = 'ru-ru'
TIME_ZONE = 'UTC'
USE_I18N = True
USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

REST_FRAMEWORK = {
    'COERCE_DECIMAL_TO_STRING': False,
}

LOG_LEVEL = config('LOG_LEVEL', default='INFO')

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
        'cloth': {'handlers': ['console'], 'level': LOG_LEVEL, 'propagate': False},
        'folding': {'handlers': ['console'], 'level': LOG_LEVEL, 'propagate': False},
        'learning': {'handlers': ['console'], 'level': LOG_LEVEL, 'propagate': False},
        'harness': {'handlers': ['console'], 'level': LOG_LEVEL, 'propagate': False},
    },
}

# Параметры вычислений
DEFAULT_SEED = config('DEFAULT_SEED', default=0, cast=int)
TORCH_NUM_THREADS = config('TORCH_NUM_THREADS', default=1, cast=int)
RUN_SLOW_TESTS = config('RUN_SLOW_TESTS', default=False, cast=bool)

RUNS_ROOT = config('RUNS_ROOT', default=os.path.join(BASE_DIR, 'runs'))
