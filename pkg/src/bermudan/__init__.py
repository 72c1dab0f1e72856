"""Dynamic look-ahead least-squares Monte Carlo for Bermudan options."""
