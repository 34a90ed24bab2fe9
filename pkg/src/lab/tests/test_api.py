import pytest
from django.contrib.auth import get_user_model
from django.urls import reverse
from rest_framework import status
from rest_framework.test import APIClient

from lab.models import ExperimentRun
from lab.serializers import ExperimentRunSerializer


pytestmark = pytest.mark.django_db


@pytest.fixture
def api_client():
    return APIClient()


@pytest.fixture
def staff_user():
    return get_user_model().objects.create_user(
        username="staff",
        password="strongpass",
        is_staff=True,
    )


@pytest.fixture
def experiment_run():
    return ExperimentRun.objects.create(
        kind=ExperimentRun.Kind.RATE_CERTIFICATE,
        seed=str(2 ** 64 - 1),
        config={"kind": "RateCertificate"},
        fits={"chi_exact": 0.5},
        output_dir="/tmp/runs/ratecertificate",
        version="0.1.0",
    )


def test_urls_resolve():
    assert reverse("lab:rates") == "/api/lab/rates/"
    assert reverse("lab:run-list") == "/api/lab/runs/"


def test_rate_certificate_defaults_to_unit_model(api_client):
    response = api_client.post(reverse("lab:rates"), {}, format="json")
    assert response.status_code == status.HTTP_200_OK
    assert response.data["chi_exact"] == 0.5
    assert 2.0e-63 <= response.data["chi_bound"] <= 3.0e-63
    assert response.data["spectrum"][0]["multiplicity"] >= 1


def test_rate_certificate_for_mollified_interaction(api_client):
    body = {"W": {"kind": "mollified_coulomb", "strength": 0.3, "mollifier": 1.0}}
    response = api_client.post(reverse("lab:rates"), body, format="json")
    assert response.status_code == status.HTTP_200_OK
    assert response.data["chi_exact"] is None
    assert response.data["spectrum"] == []


def test_rate_certificate_rejects_invalid_model(api_client):
    response = api_client.post(reverse("lab:rates"), {"gamma": -1.0}, format="json")
    assert response.status_code == status.HTTP_400_BAD_REQUEST
    assert "gamma" in response.data


def test_rate_certificate_rejects_concave_interaction(api_client):
    body = {"W": {"kind": "quadratic", "coefficient": -0.6}}
    response = api_client.post(reverse("lab:rates"), body, format="json")
    assert response.status_code == status.HTTP_400_BAD_REQUEST


def test_runs_are_public(api_client, experiment_run):
    response = api_client.get(reverse("lab:run-list"))
    assert response.status_code == status.HTTP_200_OK
    assert response.data["results"][0]["seed"] == str(2 ** 64 - 1)

    response = api_client.get(reverse("lab:run-detail", args=[experiment_run.id]))
    assert response.data["fits"] == {"chi_exact": 0.5}


def test_anonymous_delete_forbidden(api_client, experiment_run):
    response = api_client.delete(reverse("lab:run-detail", args=[experiment_run.id]))
    assert response.status_code == status.HTTP_403_FORBIDDEN
    assert ExperimentRun.objects.filter(id=experiment_run.id).exists()


def test_staff_can_delete(api_client, staff_user, experiment_run):
    api_client.force_authenticate(user=staff_user)
    response = api_client.delete(reverse("lab:run-detail", args=[experiment_run.id]))
    assert response.status_code == status.HTTP_204_NO_CONTENT
    assert not ExperimentRun.objects.exists()


def test_runs_are_read_only(api_client, staff_user):
    api_client.force_authenticate(user=staff_user)
    response = api_client.post(reverse("lab:run-list"), {"kind": "RateCertificate"}, format="json")
    assert response.status_code == status.HTTP_405_METHOD_NOT_ALLOWED


def test_run_serializer_fields(experiment_run):
    data = ExperimentRunSerializer(instance=experiment_run).data
    assert data["kind"] == "RateCertificate"
    assert data["status"] == "completed"


def test_plain_http_is_served_without_proxy_trust(api_client, staff_user, settings):
    assert settings.SECURE_PROXY_SSL_HEADER is None
    assert not settings.SECURE_SSL_REDIRECT
    api_client.force_authenticate(user=staff_user)
    response = api_client.get(reverse("lab:run-list"), HTTP_X_FORWARDED_PROTO="https")
    assert response.status_code == status.HTTP_200_OK
    assert response.wsgi_request.is_secure() is False
    assert response["X-Content-Type-Options"] == "nosniff"
