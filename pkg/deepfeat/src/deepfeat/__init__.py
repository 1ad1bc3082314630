"""Face detection/cropping and VGG16 fully-connected layer extraction.

Batch tool: reads the kinship manifest JSON, crops each face, runs the
pretrained 16-layer network, and writes fc6/relu6/fc7/relu7 activations
(4096 x 4 per sample) in the KFV1 feature container consumed by the
verification core.
"""

__version__ = "0.1.0"
