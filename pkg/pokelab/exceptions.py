class PokeLabError(Exception): pass
class ConfigError(PokeLabError): pass
class GeometryError(PokeLabError): pass

class DatasetError(PokeLabError): pass
class DatasetFormatError(DatasetError): pass
class RecordIndexError(DatasetError): pass

class KernelError(PokeLabError): pass
class ShapeError(KernelError): pass
class NonFiniteError(KernelError): pass
class CheckpointError(PokeLabError): pass

class TrainingError(PokeLabError): pass

class DivergenceError(TrainingError):
    def __init__(self, epoch: int, message: str = "loss is not finite") -> None:
        super().__init__(f"{message} (epoch {epoch})")
        self.epoch = epoch

class PlanningError(PokeLabError): pass
class DetectionError(PokeLabError): pass

class MetricError(PokeLabError): pass
class CsvFormatError(MetricError): pass
