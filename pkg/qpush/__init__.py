# Quantized push-sum simulator
