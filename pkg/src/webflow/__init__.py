"""webflow: coalescing-web and stochastic-flow simulation toolkit.

Subpackages:

* ``pathspace``   -- compactified space-time geometry, path metrics, splicing
* ``discreteweb`` -- lattice arrow fields, forward/dual walks, rescaling
* ``fullweb``     -- bi-infinite web constructions and splice enumeration
* ``stochflow``   -- correlated n-point flow motions and diffusive rescaling
* ``stats``       -- closed-form oracles, empirical laws, verification runs
* ``cli``         -- batch command-line front end (`webflow ...`)
"""

__version__ = "0.1.0"
