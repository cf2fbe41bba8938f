"""Number formatting shared by every CSV writer."""


def fmt(x) -> str:
    """12 significant digits, always with a decimal point or exponent."""
    s = f"{float(x):.12g}"
    if s.lstrip("-").isdigit():
        s += ".0"
    return s
