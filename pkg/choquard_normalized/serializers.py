# Django
from django.utils.translation import gettext as _

# Rest Framework
from rest_framework import serializers

# choquard-normalized
from choquard_normalized.grid import SCHEMES, UNIFORM_MIDPOINT
from choquard_normalized.moser import DEFAULT_SWEEP
from choquard_normalized.nonlin import EXP_CRITICAL, VARIANTS
from choquard_normalized.solver import GAUSSIAN, L2, METRICS, PROFILES

COMMANDS = ("solve", "moser-scan", "check-assumptions", "convolve-test", "verify")


class ReportSerializerMixin:
    """
    Read-only serializer for the report dataclasses.

    `renamed_fields` maps output keys that are Python keywords (`lambda`,
    `nonlocal`) to the attribute holding them; `omit_none` drops keys whose
    value is None, so that reports of one model variant carry no parameters
    of another.
    """

    omit_none = False

    def get_renamed_fields_data(self):
        if hasattr(self, "get_renamed_fields"):
            return self.get_renamed_fields()

        return getattr(self, "renamed_fields", {})

    def get_fields(self):
        fields = super().get_fields()
        for key, source in self.get_renamed_fields_data().items():
            fields[key] = serializers.FloatField(source=source, read_only=True)

        order = getattr(self, "field_order", None)
        if order:
            fields = {key: fields[key] for key in order}
        return fields

    def to_representation(self, instance):
        data = super().to_representation(instance)
        if self.omit_none:
            return {key: value for key, value in data.items() if value is not None}
        return data


class GridSerializer(ReportSerializerMixin, serializers.Serializer):
    scheme = serializers.CharField()
    size = serializers.IntegerField()
    r_max = serializers.FloatField()


class NonlinearityModelSerializer(ReportSerializerMixin, serializers.Serializer):
    omit_none = True

    variant = serializers.CharField()
    alpha = serializers.FloatField()
    sigma = serializers.FloatField(allow_null=True)
    gamma0 = serializers.FloatField(allow_null=True)
    beta0 = serializers.FloatField(allow_null=True)
    s0 = serializers.FloatField(allow_null=True)
    p = serializers.FloatField(allow_null=True)
    q = serializers.FloatField(allow_null=True)
    coefficient = serializers.FloatField(allow_null=True)
    mu = serializers.FloatField()


class EnergyBreakdownSerializer(ReportSerializerMixin, serializers.Serializer):
    renamed_fields = {"nonlocal": "nonlocal_"}
    field_order = (
        "kinetic",
        "nonlocal",
        "J",
        "pohozaev",
        "coupling",
        "lambda_est",
        "mass",
    )

    kinetic = serializers.FloatField()
    J = serializers.FloatField()
    pohozaev = serializers.FloatField()
    coupling = serializers.FloatField()
    lambda_est = serializers.FloatField()
    mass = serializers.FloatField()


class SolverConfigSerializer(ReportSerializerMixin, serializers.Serializer):
    a = serializers.FloatField()
    step = serializers.FloatField()
    tol_grad = serializers.FloatField()
    tol_pohozaev = serializers.FloatField()
    max_iter = serializers.IntegerField()
    profile = serializers.CharField()
    armijo_factor = serializers.FloatField()
    armijo_constant = serializers.FloatField()
    metric = serializers.CharField()


class SolveResultSerializer(ReportSerializerMixin, serializers.Serializer):
    renamed_fields = {"lambda": "lambda_"}
    field_order = (
        "converged",
        "diagnostic",
        "iterations",
        "lambda",
        "lambda_multiplier",
        "residual",
        "energy",
    )

    converged = serializers.BooleanField()
    diagnostic = serializers.CharField()
    iterations = serializers.IntegerField()
    lambda_multiplier = serializers.FloatField()
    residual = serializers.FloatField(allow_null=True)
    energy = EnergyBreakdownSerializer()


class CheckSerializer(ReportSerializerMixin, serializers.Serializer):
    omit_none = True

    name = serializers.CharField()
    status = serializers.CharField()
    detail = serializers.CharField()


class VerificationCheckSerializer(CheckSerializer):
    value = serializers.FloatField(allow_null=True)
    bound = serializers.FloatField(allow_null=True)


class AssumptionCheckSerializer(CheckSerializer):
    witness = serializers.FloatField(allow_null=True)
    at = serializers.FloatField(allow_null=True)


class VerificationReportSerializer(ReportSerializerMixin, serializers.Serializer):
    passed = serializers.BooleanField()
    checks = VerificationCheckSerializer(many=True)


class AssumptionReportSerializer(ReportSerializerMixin, serializers.Serializer):
    passed = serializers.BooleanField()
    model = NonlinearityModelSerializer()
    checks = AssumptionCheckSerializer(many=True)


class MoserScanResultSerializer(ReportSerializerMixin, serializers.Serializer):
    n = serializers.IntegerField()
    t_n = serializers.FloatField()
    g_max = serializers.FloatField()
    t_refined = serializers.FloatField()
    g_refined = serializers.FloatField()
    bound = serializers.FloatField()
    margin = serializers.FloatField()


class RunConfigSerializer(serializers.Serializer):
    """
    Validates the merged command line and configuration file values of a run.
    Unknown keys are rejected; every message names its key.
    """

    command = serializers.ChoiceField(choices=COMMANDS)

    variant = serializers.ChoiceField(choices=VARIANTS, default=EXP_CRITICAL)
    alpha = serializers.FloatField(default=1.0)
    gamma0 = serializers.FloatField(default=1.0)
    beta0 = serializers.FloatField(default=1.0)
    sigma = serializers.FloatField(default=4.0)
    p = serializers.FloatField(default=4.0)
    q = serializers.FloatField(default=2.0)
    s0 = serializers.FloatField(default=None, allow_null=True)

    mass = serializers.FloatField(default=1.0)
    grid_n = serializers.IntegerField(default=512, min_value=8)
    grid_r = serializers.FloatField(default=12.0)
    grid_scheme = serializers.ChoiceField(choices=SCHEMES, default=UNIFORM_MIDPOINT)

    tol_grad = serializers.FloatField(default=1e-5)
    tol_pohozaev = serializers.FloatField(default=1e-4)
    max_iter = serializers.IntegerField(default=5000, min_value=1)
    step = serializers.FloatField(default=0.5)
    profile = serializers.ChoiceField(choices=PROFILES, default=GAUSSIAN)
    metric = serializers.ChoiceField(choices=METRICS, default=L2)

    moser_n = serializers.ListField(
        child=serializers.IntegerField(min_value=2),
        default=list(DEFAULT_SWEEP),
        allow_empty=False,
    )
    field = serializers.CharField(default=None, allow_null=True)
    out = serializers.CharField(default="out")
    verbose = serializers.BooleanField(default=False)
    config = serializers.CharField(default=None, allow_null=True)

    def to_internal_value(self, data):
        unknown = sorted(set(data) - set(self.fields))
        if unknown:
            raise serializers.ValidationError(
                {key: [_("Unknown key.")] for key in unknown}
            )
        return super().to_internal_value(data)

    def validate_alpha(self, value):
        if not 0 < value < 2:
            raise serializers.ValidationError(_("alpha must lie in (0,2)."))
        return value

    def _positive(self, name, value):
        if not value > 0:
            raise serializers.ValidationError(
                _("{} must be positive.").format(name)
            )
        return value

    def validate_gamma0(self, value):
        return self._positive("gamma0", value)

    def validate_beta0(self, value):
        return self._positive("beta0", value)

    def validate_mass(self, value):
        return self._positive("mass", value)

    def validate_grid_r(self, value):
        return self._positive("grid_r", value)

    def validate_tol_grad(self, value):
        return self._positive("tol_grad", value)

    def validate_tol_pohozaev(self, value):
        return self._positive("tol_pohozaev", value)

    def validate_step(self, value):
        return self._positive("step", value)

    def validate(self, attrs):
        if attrs["command"] == "moser-scan" and attrs["variant"] == "power":
            raise serializers.ValidationError(
                {"variant": [_("moser-scan needs a model with exponential growth.")]}
            )
        return attrs
