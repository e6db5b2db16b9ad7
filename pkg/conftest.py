import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'trafficMonitor.settings')
django.setup()
