from .biarmpy import *


__name__ = "biarmpy"
__version__ = "Version 0.1.0"
__license__ = "GNU General Public License V3.0"


#module level docstring
__doc__ = '''
Bimanual desk robot manipulation planning for Python
====================================================

biarmpy turns short robot programs (or instructions, through a template
planner) into motions of two 6-joint desk arms. Perception returns
bounding boxes and segmented point clouds, a point cloud network or a
heuristic proposes grasps, a sequential quadratic programming planner
with receding meta-steps plans collision free joint trajectories and a
compliant joint controller executes them in a kinematic simulation with
attach, handover, pedal and cap-twisting events.

Skills: pick, place, handover, push and twist, composed into
pick_and_place, unscrew_cap and discard_trash.


Quick start
-----------
    import biarmpy as bp
    scene, plan_text = bp.load_example_scene('sorting')
    rep, ctx = bp.run_scenario(scene, plan_text)

or from the command line:

    python -m biarmpy run --example sorting
'''
