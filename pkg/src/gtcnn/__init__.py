"""gtcnn - graph-time signal processing and graph-time convolutional networks."""
