# Provenance codes shared by both kernel backends and srdl.labeling.
NONE = 0
MODE = 1
STAGE1_SPECTRAL = 2
STAGE2_CONSENSUS = 3
STAGE2_SPECTRAL = 4
