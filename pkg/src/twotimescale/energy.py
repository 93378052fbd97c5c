"""Frame-level energy management: how much harvested energy to use and how
much grid energy to buy, in closed form."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class EnergyDecision:
    harvested: float  # J, theta
    purchased: float  # J, g
    psi: float  # V*T*beta*eta - headroom; buy only when negative

    @property
    def total(self) -> float:
        return self.harvested + self.purchased


def schedule_energy(E: float, phi: float, eta: float, g_max: float, E_max: float,
                    V: float, T: int, beta: float, kappa: float = 0.0,
                    tol: float = 1e-12) -> EnergyDecision:
    """Minimise the frame energy term over C1-C3.

    Harvested energy is used up to the battery headroom. Grid energy fills
    the rest of the headroom (capped at ``g_max``) only when the weighted
    price ``V*T*beta*eta`` is below the headroom.

    The objective is linear, so the only other vertex that can win is "use
    nothing": when the weighted harvest price ``V*T*beta*kappa`` exceeds the
    headroom, harvesting raises the objective and is skipped. With
    ``kappa = 0`` this guard never fires.
    """
    if E > E_max + tol:
        raise ValueError(f"energy backlog {E} exceeds capacity {E_max}")
    if E < -tol or phi < 0 or eta < 0 or kappa < 0:
        raise ValueError("E, phi, eta and kappa must be nonnegative")
    headroom = max(0.0, E_max - E)
    theta = min(phi, headroom)
    if V * T * beta * kappa > headroom:
        theta = 0.0
    psi = V * T * beta * eta - headroom
    g = max(0.0, min(headroom - theta, g_max)) if psi < 0 else 0.0
    assert E + g + theta <= E_max + tol
    return EnergyDecision(theta, g, psi)


def kappa_regime_ok(E: float, kappa: float, eta: float, V: float, T: int, beta: float,
                    E_max: float) -> bool:
    """True when the harvest decision is independent of both prices."""
    return kappa < eta and V * T * beta * kappa <= E_max - E


def d1_value(g: float, theta: float, E: float, eta: float, kappa: float, V: float,
             T: int, beta: float, E_max: float) -> float:
    headroom = E_max - E
    return V * T * beta * eta * g - headroom * g + V * T * beta * kappa * theta - headroom * theta
