from .blobs import BlobSpec, make_blobs
from .dataset import Dataset
from .idx import load_idx, read_idx_images, read_idx_labels, write_idx
from .tabular import load_csv, save_csv

__all__ = [
    "BlobSpec",
    "Dataset",
    # generators
    "make_blobs",
    # files
    "load_csv",
    "save_csv",
    "load_idx",
    "read_idx_images",
    "read_idx_labels",
    "write_idx",
]
