# Copyright 2026 The heraldsim Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

# Independent Fock-space oracle in mpmath (50 digits): photon-number Markov chain with
# binomial losses and balls-into-bins click kernels written from scratch.
from mpmath import mp, mpf, cosh, sqrt, binomial
mp.dps = 50
def click(n, N, k, eta):
    # direct sum over exactly-k occupied bins of the surviving photons
    tot = mpf(0)
    for s in range(n+1):
        ps = binomial(n,s)*eta**s*(1-eta)**(n-s)
        # P(k distinct of N | s balls) = C(N,k) k! S(s,k) / N^s
        tot += ps*stirling(s,k,N)
    return tot
from functools import lru_cache
@lru_cache(None)
def S2(n,k):
    if n==0 and k==0: return 1
    if n==0 or k==0: return 0
    return k*S2(n-1,k)+S2(n-1,k-1)
def stirling(s,k,N):
    if k> N: return mpf(0)
    f=1
    for i in range(k): f*= (N-i)
    return mpf(f)*S2(s,k)/mpf(N)**s
def chain(zeta, pat, Np=4, etap=1, N=8, eta=1, loop=1, total=None, cut=70):
    g = cosh(zeta)**2; lam=(g-1)/g
    p = {0: mpf(1)}
    t = max(len(pat), total or 0)
    for i in range(t):
        q = {}
        for m, pm in p.items():
            for j in range(cut):
                w = pm*binomial(m+j,j)*lam**j*(1-lam)**(m+1)
                if i < len(pat): w *= click(j, Np, pat[i], etap)
                q[m+j] = q.get(m+j, 0) + w
        p = q
        if i+1 < t:
            r = {}
            for n, pn in p.items():
                for s in range(n+1):
                    r[s] = r.get(s,0)+pn*binomial(n,s)*loop**s*(1-loop)**(n-s)
            p = r
    P = sum(p.values())
    c = [sum(pn*click(n,N,k,eta) for n,pn in p.items())/P for k in range(N+1)]
    return P, c
def show(name, r):
    P,c=r
    print(name, "P=%s" % mp.nstr(P,17), "c=[%s]" % ", ".join(mp.nstr(x,17) for x in c))
print("gamma(0.3)", mp.nstr(cosh(mpf('0.3'))**2, 17))
show("DH2 lossless z0.3", chain(mpf('0.3'), [2], cut=40))
show("FH2 lossless z0.3", chain(mpf('0.3'), [1,1], cut=40))
show("FH3 lossless z0.2", chain(mpf('0.2'), [1,1,1], cut=35))
show("(1,1) ref z0.3", chain(mpf('0.3'), [1,1], etap=mpf('0.36'), eta=mpf('0.38'), loop=mpf('0.6'), cut=40))
show("(2,0) ref z0.3", chain(mpf('0.3'), [2,0], etap=mpf('0.36'), eta=mpf('0.38'), loop=mpf('0.6'), cut=40))
show("(2)+1 ref z0.3", chain(mpf('0.3'), [2], etap=mpf('0.36'), eta=mpf('0.38'), loop=mpf('0.6'), total=2, cut=40))
show("(1,1,1) ref z0.25 loop .55", chain(mpf('0.25'), [1,1,1], etap=mpf('0.36'), eta=mpf('0.38'), loop=mpf('0.55'), cut=35))
print("neg fock1", mp.nstr((1-sqrt(mpf('1.0625')))/2, 17))
