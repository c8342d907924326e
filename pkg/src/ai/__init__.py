"""
AI - Classificadores Bonafide/Spoof
===================================

Bloco Quantum Vision e os quatro classificadores:
- CNN e QV-CNN
- ViT e QV-ViT
- Treino, checkpoints e pontuação
- Renderização das ondas de informação
"""
