import numpy as np
# ironbow control points (t, r, g, b)
cp = np.array([
 [0.00,   0,   0,   0],
 [0.15,  32,   0, 110],
 [0.30, 110,   0, 150],
 [0.45, 190,  20, 110],
 [0.60, 235,  70,  20],
 [0.75, 250, 140,   0],
 [0.90, 255, 215,  40],
 [1.00, 255, 255, 255]], float)
ts = np.linspace(0, 1, 20001)
path = np.stack([np.interp(ts, cp[:,0], cp[:,k]) for k in (1,2,3)], 1)
luma = path @ np.array([0.299, 0.587, 0.114])
assert np.all(np.diff(luma) > 0), "path luma not monotone"
out = []
prev = -1
for i in range(256):
    target = i * luma[-1] / 255
    t = np.interp(target, luma, ts)
    c = np.round([np.interp(t, cp[:,0], cp[:,k]) for k in (1,2,3)]).astype(int)
    l = c @ np.array([0.299, 0.587, 0.114])
    while l <= prev:
        # nudge green (largest luma weight) then red
        if c[1] < 255: c[1] += 1
        elif c[0] < 255: c[0] += 1
        else: c[2] += 1
        l = c @ np.array([0.299, 0.587, 0.114])
    out.append(c); prev = l
out = np.array(out)
l = out @ np.array([0.299,0.587,0.114])
assert np.all(np.diff(l) > 0) and out.max() <= 255
with open('core/data/ironbow_table.inc','w') as f:
    f.write("// 256-entry ironbow-style colour map, strictly increasing BT.601 luma.\n")
    for i in range(0,256,4):
        f.write("    " + " ".join("{%d, %d, %d}," % tuple(out[j]) for j in range(i,i+4)) + "\n")
print(out[0], out[128], out[255], np.diff(l).min())
