import logging
from typing import Iterator, Mapping, Optional

from rest_framework import serializers
from rest_framework.settings import api_settings

from .domain import (
    Dataset,
    LearningCurve,
    Order,
    PreProductionEvent,
    ProductionLine,
    ProductType,
)

logger = logging.getLogger(__name__)


class IntKeyDictField(serializers.DictField):
    """JSON objects keyed by integer ids ("1", "-7") mapped to int keys."""

    def to_internal_value(self, data):
        values = super().to_internal_value(data)
        try:
            return {int(key): value for key, value in values.items()}
        except (TypeError, ValueError):
            raise serializers.ValidationError("Keys must be integers.")


class LearningCurveSerializer(serializers.Serializer):
    day = serializers.IntegerField()
    efficiency = serializers.FloatField()

    def to_representation(self, instance):
        day, efficiency = instance
        return {"day": day, "efficiency": efficiency}


class ProductTypeSerializer(serializers.Serializer):
    id = serializers.IntegerField()
    name = serializers.CharField()
    learning_curve = LearningCurveSerializer(many=True, source="learning_curve.breakpoints", allow_empty=True)


class ProductionLineSerializer(serializers.Serializer):
    id = serializers.IntegerField()
    capacity_minutes_per_day = serializers.FloatField()
    efficiency_by_type = IntKeyDictField(child=serializers.FloatField())


class PreProductionEventSerializer(serializers.Serializer):
    name = serializers.CharField()
    offset_days = serializers.IntegerField()
    finished = serializers.BooleanField()
    # finished flags as known on each s_day, e.g. {"-7": false}
    progress = IntKeyDictField(child=serializers.BooleanField(), required=False)


class OrderSerializer(serializers.Serializer):
    id = serializers.IntegerField()
    product_type = serializers.IntegerField()
    quantity = serializers.IntegerField()
    due_day = serializers.IntegerField()
    smv = serializers.FloatField()
    events = PreProductionEventSerializer(many=True, required=False)


class DatasetSerializer(serializers.Serializer):
    name = serializers.CharField(required=False, allow_blank=True, default="")
    s_day = serializers.IntegerField()
    p_day = serializers.IntegerField(default=0)
    product_types = ProductTypeSerializer(many=True, source="types")
    lines = ProductionLineSerializer(many=True)
    orders = OrderSerializer(many=True)

    def create(self, validated_data):
        types = tuple(
            ProductType(
                id=item["id"],
                name=item["name"],
                learning_curve=LearningCurve(
                    breakpoints=tuple(
                        (point["day"], point["efficiency"])
                        for point in item["learning_curve"]["breakpoints"]
                    )
                ),
            )
            for item in validated_data["types"]
        )
        lines = tuple(
            ProductionLine(
                id=item["id"],
                efficiency_by_type=dict(item["efficiency_by_type"]),
                capacity_minutes_per_day=item["capacity_minutes_per_day"],
            )
            for item in validated_data["lines"]
        )
        orders = tuple(
            Order(
                id=item["id"],
                product_type=item["product_type"],
                quantity=item["quantity"],
                due_day=item["due_day"],
                smv=item["smv"],
                events=tuple(
                    PreProductionEvent(
                        name=event["name"],
                        offset_days=event["offset_days"],
                        finished=event["finished"],
                        progress=dict(event.get("progress", {})),
                    )
                    for event in item.get("events", [])
                ),
            )
            for item in validated_data["orders"]
        )
        return Dataset(
            lines=lines,
            orders=orders,
            types=types,
            s_day=validated_data["s_day"],
            p_day=validated_data.get("p_day", 0),
            name=validated_data.get("name", ""),
        )


def unknown_keys(serializer, data, path="") -> Iterator[str]:
    """Paths of keys in `data` that `serializer` does not declare."""
    if isinstance(serializer, serializers.ListSerializer):
        if isinstance(data, list):
            for index, item in enumerate(data):
                yield from unknown_keys(serializer.child, item, f"{path}[{index}]")
        return
    if not isinstance(serializer, serializers.Serializer) or not isinstance(data, Mapping):
        return
    fields = serializer.fields
    for key, value in data.items():
        sub_path = f"{path}.{key}" if path else str(key)
        if key not in fields:
            yield sub_path
        else:
            yield from unknown_keys(fields[key], value, sub_path)


def flatten_errors(errors, path="") -> Iterator[str]:
    """DRF's nested error structure as `path: message` lines."""
    if isinstance(errors, Mapping):
        for key, value in errors.items():
            if key == api_settings.NON_FIELD_ERRORS_KEY:
                sub_path = path
            elif isinstance(key, int):
                sub_path = f"{path}[{key}]"
            else:
                sub_path = f"{path}.{key}" if path else str(key)
            yield from flatten_errors(value, sub_path)
    elif isinstance(errors, (list, tuple)):
        for index, value in enumerate(errors):
            if isinstance(value, str):
                yield f"{path or '<root>'}: {value}"
            elif value:
                yield from flatten_errors(value, f"{path}[{index}]")
    else:
        yield f"{path or '<root>'}: {errors}"


def parse_dataset(data) -> tuple[Optional[Dataset], list[str]]:
    """
    Structural validation of a decoded dataset document.

    Returns the dataset and the path-qualified error messages; the dataset is
    None when there are errors. Unknown keys are logged and ignored.
    """
    serializer = DatasetSerializer(data=data)
    for path in unknown_keys(serializer, data):
        logger.warning("ignoring unknown dataset field %s", path)
    if not serializer.is_valid():
        return None, list(flatten_errors(serializer.errors))
    return serializer.save(), []


def dataset_payload(dataset: Dataset) -> dict:
    return DatasetSerializer(dataset).data


class ScheduledSubOrderSerializer(serializers.Serializer):
    order_id = serializers.IntegerField()
    index = serializers.IntegerField()
    line_id = serializers.IntegerField()
    quantity = serializers.IntegerField()
    a_day = serializers.IntegerField()
    f_day = serializers.IntegerField()
    p_time = serializers.IntegerField()
    daily_quantities = serializers.ListField(child=serializers.FloatField())


class ScheduleSerializer(serializers.Serializer):
    suborders = ScheduledSubOrderSerializer(many=True)


class ObjectivePointSerializer(serializers.Serializer):
    f1 = serializers.FloatField()
    f2 = serializers.FloatField()
    kind = serializers.CharField()
    h_samples = serializers.IntegerField(allow_null=True)
    beta = serializers.FloatField(allow_null=True)
