"""
Cloneable-witness verifier calculus.

- toy.py: toy verifiers, cloners and presets
- product.py: product-state maximization and the swap/product tests
- transforms.py: the four verifier transformations with parameter tracking
- pipeline.py: the composed chain and its report
"""
