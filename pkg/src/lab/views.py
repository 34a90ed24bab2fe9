"""
API views for lab app (rate certificates, stored runs).
"""

from rest_framework import mixins, status, viewsets
from rest_framework.decorators import api_view, permission_classes
from rest_framework.permissions import AllowAny
from rest_framework.response import Response

from kinetics.potentials import build_model, potential_from_dict
from kinetics.rates import rate_report

from .models import ExperimentRun
from .permissions import RunPermission
from .serializers import ExperimentRunSerializer, RateReportSerializer, RateRequestSerializer


@api_view(['POST'])
@permission_classes([AllowAny])
def rate_certificate_view(request):
    """
    Rates of a model.

    POST /api/lab/rates/

    Request Body (every key optional, defaults give the unit quadratic model):
    {
        "d": 1,
        "gamma": 1.0,
        "sigma": 1.0,
        "V": {"kind": "quadratic", "coefficient": 1.0},
        "W": {"kind": "mollified_coulomb", "strength": 0.3, "mollifier": 1.0},
        "n_particles": 2
    }

    Response: the rate report, with "spectrum" empty for non-quadratic models.
    """
    serializer = RateRequestSerializer(data=request.data)

    if serializer.is_valid():
        data = serializer.validated_data
        model = build_model(data['d'], data['gamma'], data['sigma'],
                            potential_from_dict(data['V']), potential_from_dict(data['W']))
        report = rate_report(model, data['n_particles'])
        return Response(RateReportSerializer(report.as_dict()).data, status=status.HTTP_200_OK)

    return Response(serializer.errors, status=status.HTTP_400_BAD_REQUEST)


class ExperimentRunViewSet(mixins.ListModelMixin,
                           mixins.RetrieveModelMixin,
                           mixins.DestroyModelMixin,
                           viewsets.GenericViewSet):
    """
    Anyone can read stored runs; only staff can delete them.
    """

    queryset = ExperimentRun.objects.all().order_by("-created_at")
    serializer_class = ExperimentRunSerializer
    permission_classes = [RunPermission]
