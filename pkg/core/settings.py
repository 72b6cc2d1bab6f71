"""
Django settings for the triangle counting project.

Engine and benchmark knobs are flat constants read from the environment
(or a local .env file). Library code only reads them through the
``from_settings`` constructors of its config objects.
"""
import os
from pathlib import Path

from dotenv import load_dotenv

load_dotenv()  # picks up a local .env file if present


def _optional_int(name):
    value = os.getenv(name)
    return int(value) if value not in (None, '') else None


def _optional_float(name):
    value = os.getenv(name)
    return float(value) if value not in (None, '') else None


SECRET_KEY_ENV = os.getenv('DJANGO_SECRET_KEY')

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# Pipeline engine
TRIANGLES_BATCH_SIZE = int(os.getenv('TRIANGLES_BATCH_SIZE', 256))
TRIANGLES_CHANNEL_CAPACITY = int(os.getenv('TRIANGLES_CHANNEL_CAPACITY', 0))  # 0 = rendezvous
TRIANGLES_MAX_LIVE_FILTERS = _optional_int('TRIANGLES_MAX_LIVE_FILTERS')
TRIANGLES_PIPELINE_DEADLINE = _optional_float('TRIANGLES_PIPELINE_DEADLINE')

# MapReduce engine
TRIANGLES_MR_MAPPERS = int(os.getenv('TRIANGLES_MR_MAPPERS', os.cpu_count() or 1))
TRIANGLES_MR_REDUCERS = int(os.getenv('TRIANGLES_MR_REDUCERS', os.cpu_count() or 1))
TRIANGLES_MR_CHANNEL_CAPACITY = int(os.getenv('TRIANGLES_MR_CHANNEL_CAPACITY', 64))
TRIANGLES_SPILL_DIR = os.getenv('TRIANGLES_SPILL_DIR') or None

# Benchmark harness
BENCH_TIMEOUT_SECONDS = float(os.getenv('BENCH_TIMEOUT_SECONDS', 300))
BENCH_CSV_PATH = Path(os.getenv('BENCH_CSV_PATH', BASE_DIR / 'bench_results.csv'))

LOG_LEVEL = os.getenv('LOG_LEVEL', 'INFO')

# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = SECRET_KEY_ENV or 'django-insecure-triangles-local-only'

# SECURITY WARNING: don't run with debug turned on in production!
DEBUG = os.getenv('DJANGO_DEBUG', '1') == '1'

ALLOWED_HOSTS = ['localhost', '127.0.0.1', 'testserver']


# Application definition

INSTALLED_APPS = [
    'django.contrib.admin',
    'django.contrib.auth',
    'django.contrib.contenttypes',
    'django.contrib.sessions',
    'django.contrib.messages',
    'django.contrib.staticfiles',
    'triangles',
    'bench',
]

MIDDLEWARE = [
    'django.middleware.security.SecurityMiddleware',
    'django.contrib.sessions.middleware.SessionMiddleware',
    'django.middleware.common.CommonMiddleware',
    'django.middleware.csrf.CsrfViewMiddleware',
    'django.contrib.auth.middleware.AuthenticationMiddleware',
    'django.contrib.messages.middleware.MessageMiddleware',
    'django.middleware.clickjacking.XFrameOptionsMiddleware',
]

ROOT_URLCONF = 'core.urls'

WSGI_APPLICATION = 'core.wsgi.application'

TEMPLATES = [
    {
        'BACKEND': 'django.template.backends.django.DjangoTemplates',
        'APP_DIRS': True,
        'DIRS': [],
        'OPTIONS': {
            'context_processors': [
                'django.template.context_processors.request',
                'django.contrib.auth.context_processors.auth',
                'django.contrib.messages.context_processors.messages',
            ],
        },
    },
]


# Database

DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': BASE_DIR / 'db.sqlite3',
    }
}

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# Logging: everything on stderr so command output on stdout stays clean.

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'plain': {
            'format': '%(asctime)s %(levelname)s %(name)s: %(message)s',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'stream': 'ext://sys.stderr',
            'formatter': 'plain',
        },
    },
    'loggers': {
        'triangles': {'handlers': ['console'], 'level': LOG_LEVEL, 'propagate': False},
        'bench': {'handlers': ['console'], 'level': LOG_LEVEL, 'propagate': False},
    },
}


# Internationalization

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = True

USE_TZ = True


# Static files (CSS, JavaScript, Images)

STATIC_URL = 'static/'
