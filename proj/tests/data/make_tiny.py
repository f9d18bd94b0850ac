# Regenerates the n = 30 smoke dataset (SEM errors, gamma = 0.3, linear mean). Run inside tests/data.
import numpy as np, sys
seed = int(sys.argv[1]) if len(sys.argv) > 1 else 4
rng=np.random.default_rng(seed)
n=30
c=rng.uniform(size=(n,2))
d=np.linalg.norm(c[:,None]-c[None],axis=2); np.fill_diagonal(d,np.inf)
rows=[]
for i in range(n):
    for j in np.argsort(d[i],kind='stable')[:3]: rows.append((i,int(j),1/3))
W=np.zeros((n,n))
for i,j,v in rows: W[i,j]=v
z=rng.uniform(0,2*np.pi,size=(n,3)); x=np.c_[(z[:,0]+z[:,1])/2,(z[:,0]+z[:,2])/2]
u=np.linalg.solve(np.eye(n)-0.3*W,rng.standard_normal(n))
y=1+x[:,0]+x[:,1]+u
with open('w.csv','w') as f:
    f.write('row,col,value\n')
    for i,j,v in rows: f.write(f'{i},{j},{float(v)!r}\n')
with open('x.csv','w') as f:
    f.write('x1,x2\n')
    for r in x: f.write(f'{float(r[0])!r},{float(r[1])!r}\n')
with open('y.csv','w') as f:
    f.write('y\n')
    for v in y: f.write(f'{float(v)!r}\n')
