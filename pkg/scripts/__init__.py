"""Scripts de utilidad de RetroDraft"""
