"""
URL configuration for lab app.
"""

from django.urls import include, path
from rest_framework.routers import DefaultRouter

from .views import ExperimentRunViewSet, rate_certificate_view

app_name = "lab"

router = DefaultRouter()
router.register(r"runs", ExperimentRunViewSet, basename="run")

urlpatterns = [
    path("rates/", rate_certificate_view, name="rates"),
    path("", include(router.urls)),
]
