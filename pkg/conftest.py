import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'stitchplan.settings')
django.setup()
