"""FMCW radar pipeline for contiguous daily-living motion recognition.

Submodules
----------
sim         synthetic dechirped baseband from scripted kinematic scenarios
rdmap       range map, micro-Doppler spectrogram, log scaling, resizing
preprocess  column normalization, eCLEAN, outlier removal, kernel cleaning
radon       Radon transform motion segmentation and breaking points
pbc         power burst curve onset/offset detection and event merging
features    2-D PCA, fused feature vectors, nearest-neighbor classification
ethogram    motion state diagram and forward/backward sequence decoding
cli         command-line pipeline (simulate/pipeline/train/decode/evaluate/plot)
"""

__version__ = "0.1.0"
