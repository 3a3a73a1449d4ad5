"""Time-periodic solutions of a completely resonant dispersive equation.

Solves ``omega u_t + H u_xx + (u^3)_x + N4(u) = 0`` on the torus near
multimodal kernel solutions, with a Nash-Moser iteration built on a
conjugation of the linearized operator to constant coefficients.
"""

__version__ = "0.1.0"
