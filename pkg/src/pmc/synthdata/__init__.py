from pmc.synthdata.dataset import (FUSED, SOURCE, TARGET, DatasetSchema, DomainSplit, HiddenTruth, ModalitySchema,
                                   MultiModalDataset, Sample, drop_modality, with_target_payload)
from pmc.synthdata.benchmark import BenchmarkSpec, ModalityBenchmark, blobs_mm2, generate_benchmark
from pmc.synthdata.dataset_io import load, save
