"""Rb vapor number density, resonant fraction and optical depth vs cell temperature."""

from psrlab.atoms import EnsembleConfig, doppler_resonant_fraction, rb_vapor_density, transit_rate

print("T_C   density_m3   resonant_fraction   OD(75 mm)   transit_kHz")
for t_c in (50, 60, 70, 74, 80, 90):
    t = t_c + 273.15
    n = rb_vapor_density(t)
    frac = doppler_resonant_fraction(t)
    od = EnsembleConfig(number_density=n, temperature=t, resonant_fraction=frac).optical_depth
    print(f"{t_c:4d}  {n:10.3g}   {frac:17.4f}   {od:9.1f}   {transit_rate(t, 2e-3) / 6.283185307179586e3:10.1f}")
