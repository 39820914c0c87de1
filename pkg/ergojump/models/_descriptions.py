"""
Descriptions for ergojump Data Models

Field descriptions are kept in a separate module to keep the model code clean
and readable.
"""


class _KappaDescriptions:
    """
    Descriptions for the Continuity Modulus
    """

    variant = """
    Family of the modulus: "log" for C1·(log(1/x) ∨ K)^(1/beta1), "constant" for
    the Lipschitz case κ ≡ C1, "user" for a supplied vectorised function
    """
    C1 = """
    Positive multiplicative constant
    """
    K = """
    Positive floor applied to log(1/x) before the power is taken
    """
    beta1 = """
    Exponent parameter; κ uses the power 1/beta1
    """
    function = """
    User supplied vectorised κ, only used when variant is "user"
    """


class _KernelDescriptions:
    """
    Descriptions for the Jump Kernel
    """

    total_rate = """
    Total mass ν(U_0) of the jump measure, i.e. jump events per unit time
    """
    uniform_dim = """
    Number of uniform variates the mark sampler consumes per mark
    """
    mark_dim = """
    Dimension of a mark u ∈ U_0
    """
    mark_sampler = """
    Deterministic map from an (n, uniform_dim) array of uniforms to (n, mark_dim) marks
    """
    compensator = """
    Optional closed form of ∫ f(x, u) ν(du), vectorised over x
    """
    mark_moments = """
    Optional closed forms of ∫ |f(x, u)|^q ν(du) for q in {2, 4}, keyed by q
    """
    increment_moment = """
    Optional closed form of ∫ |f(x, u) - f(y, u)|^2 ν(du), vectorised over pairs
    """


class _CoefficientDescriptions:
    """
    Descriptions for Coefficient Sets
    """

    dim = """
    State dimension d
    """
    drift = """
    Vectorised drift b: (n, d) -> (n, d)
    """
    diffusion = """
    Vectorised diffusion σ: (n, d) -> (n, d, d)
    """
    jump_map = """
    Vectorised jump map f: ((n, d), (n, m)) -> (n, d)
    """
    jump_lipschitz = """
    Vectorised Lipschitz function L: (n, m) -> (n,) with values in (0, gamma]
    """
    lambda0 = """
    Constant of the monotonicity condition; may be negative
    """
    lambda1 = """
    Linear growth constant
    """
    lambda2 = """
    Uniform ellipticity constant
    """
    lambda3 = """
    Dissipation constant of the drift condition
    """
    lambda4 = """
    Additive constant of the drift condition
    """
    r = """
    Growth exponent of the drift condition
    """
    gamma = """
    Uniform bound on the jump Lipschitz function
    """
    stiffness = """
    Declared stiffness bound; the Euler step must satisfy dt <= 1 / (4 * stiffness)
    """
    declared_hypotheses = """
    Hypotheses the declared constants are claimed to satisfy
    """


class _CouplingDescriptions:
    """
    Descriptions for Coupling Parameters
    """

    delta = """
    Coupling neighbourhood, in (0, e^-1)
    """
    alpha = """
    Exponent in the scaled reflection direction, in (0, 1)
    """
    couple_eps = """
    Numerical coalescence threshold; defaults to delta * 1e-4
    """
    bridge_crossing = """
    Detect coalescence inside a step with a Brownian-bridge crossing test
    """
    glue = """
    Glue the pair by assignment after the coupling time
    """


class _GridDescriptions:
    """
    Descriptions for Histogram Grids
    """

    lower = """
    Lower corner of the axis-aligned box
    """
    upper = """
    Upper corner of the axis-aligned box
    """
    bins = """
    Number of bins per axis
    """
