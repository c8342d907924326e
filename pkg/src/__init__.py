"""
QV-Spoof - Detecção de Áudio Falsificado com Quantum Vision
===========================================================

Classificadores CNN/ViT com e sem o bloco Quantum Vision sobre
imagens STFT, Mel e MFCC, treinados com um motor numpy próprio.

Autor: Equipe QV-Spoof
Versão: 1.0.0
"""

__version__ = "1.0.0"
__author__ = "Equipe QV-Spoof"
